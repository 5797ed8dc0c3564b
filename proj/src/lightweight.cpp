#include "metacog/lightweight.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>

namespace metacog {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double log_interval_mass(double mu, double sigma) {
  // Normal mass on (0,1) around mu.
  const double hi = normal_cdf((1.0 - mu) / sigma);
  const double lo = normal_cdf((0.0 - mu) / sigma);
  return std::log(hi - lo);
}

double logsumexp(std::span<const double> v) {
  double mx = kNegInf;
  for (double x : v) mx = std::max(mx, x);
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

std::uint32_t world_mask(const LwWorldState& w) {
  std::uint32_t m = 0;
  for (std::size_t i = 0; i < w.presence.size(); ++i) {
    if (w.presence[i]) m |= (1u << i);
  }
  return m;
}

// Normalized weights from log weights; falls back to uniform when every
// weight is -inf (impossible data under all hypotheses).
std::vector<double> normalized_weights(std::span<const double> logw) {
  std::vector<double> w(logw.size());
  const double lz = logsumexp(logw);
  if (lz == kNegInf) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(logw.size()));
    return w;
  }
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(logw[i] - lz);
  return w;
}

std::vector<std::size_t> systematic_resample(std::span<const double> weights, Rng& rng) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> idx(n);
  const double u = rng.uniform();
  double cum = weights[0];
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = (u + static_cast<double>(i)) / static_cast<double>(n);
    while (cum < pos && j + 1 < n) {
      ++j;
      cum += weights[j];
    }
    idx[i] = j;
  }
  return idx;
}

// Weighted posterior mode over particle hypotheses; ties resolve to the
// smaller bitmask.
LwWorldState weighted_mode(std::span<const std::uint32_t> masks, std::span<const double> weights,
                           std::size_t num_categories) {
  std::map<std::uint32_t, double> mass;
  for (std::size_t i = 0; i < masks.size(); ++i) mass[masks[i]] += weights[i];
  std::uint32_t best = 0;
  double best_mass = -1.0;
  for (const auto& [mask, m] : mass) {
    if (m > best_mass) {
      best_mass = m;
      best = mask;
    }
  }
  LwWorldState w;
  w.presence.assign(num_categories, 0);
  for (std::size_t c = 0; c < num_categories; ++c) {
    if (best & (1u << c)) w.presence[c] = 1;
  }
  return w;
}

}  // namespace

void LwTheta::validate() const {
  if (halluc_probs.size() != miss_probs.size()) {
    throw std::invalid_argument("lw theta: vectors must have equal length");
  }
  if (halluc_probs.empty()) throw std::invalid_argument("lw theta: need categories");
  for (double v : halluc_probs) {
    if (!(v >= 0.0) || !(v <= 1.0)) throw std::invalid_argument("lw theta: values must lie in [0,1]");
  }
  for (double v : miss_probs) {
    if (!(v >= 0.0) || !(v <= 1.0)) throw std::invalid_argument("lw theta: values must lie in [0,1]");
  }
}

void LwWorldPrior::validate() const {
  if (num_categories < 1 || num_categories > 32) {
    throw std::invalid_argument("lw world prior: need 1..32 categories");
  }
  if (!(count_mean > 0.0)) throw std::invalid_argument("lw world prior: count mean must be > 0");
  if (count_min < 0 || count_min > effective_count_max()) {
    throw std::invalid_argument("lw world prior: empty count support");
  }
}

int LwWorldPrior::effective_count_max() const {
  return std::min<int>(count_max, static_cast<int>(num_categories));
}

namespace {

double log_binomial(std::size_t n, std::size_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

std::vector<double> truncated_poisson_weights(double mean, int lo, int hi) {
  std::vector<double> w;
  double term = std::exp(-mean);
  for (int k = 1; k <= hi; ++k) {
    term *= mean / static_cast<double>(k);
    if (k >= lo) w.push_back(term);
  }
  if (lo == 0) w.insert(w.begin(), std::exp(-mean));
  return w;
}

}  // namespace

double LwWorldPrior::log_prob(const LwWorldState& world) const {
  validate();
  if (world.size() != num_categories) {
    throw std::invalid_argument("lw world prior: dimension mismatch");
  }
  int n = 0;
  for (auto b : world.presence) n += b ? 1 : 0;
  const int hi = effective_count_max();
  if (n < count_min || n > hi) return kNegInf;
  const auto w = truncated_poisson_weights(count_mean, count_min, hi);
  double z = 0.0;
  for (double x : w) z += x;
  const double log_count = std::log(w[static_cast<std::size_t>(n - count_min)] / z);
  return log_count - log_binomial(num_categories, static_cast<std::size_t>(n));
}

LwWorldState LwWorldPrior::sample(Rng& rng) const {
  validate();
  const int hi = effective_count_max();
  const auto weights = truncated_poisson_weights(count_mean, count_min, hi);
  const int n = count_min + static_cast<int>(rng.categorical(weights));
  const auto perm = rng.permutation(num_categories);
  LwWorldState w;
  w.presence.assign(num_categories, 0);
  for (int i = 0; i < n; ++i) w.presence[perm[static_cast<std::size_t>(i)]] = 1;
  return w;
}

std::vector<LwWorldState> LwWorldPrior::enumerate() const {
  validate();
  std::vector<LwWorldState> out;
  const int hi = effective_count_max();
  const std::uint32_t limit = num_categories >= 32 ? 0xffffffffu
                                                   : ((1u << num_categories) - 1u);
  for (std::uint32_t mask = 0; mask <= limit; ++mask) {
    const int bits = std::popcount(mask);
    if (bits < count_min || bits > hi) {
      if (mask == limit) break;
      continue;
    }
    LwWorldState w;
    w.presence.assign(num_categories, 0);
    for (std::size_t c = 0; c < num_categories; ++c) {
      if (mask & (1u << c)) w.presence[c] = 1;
    }
    out.push_back(std::move(w));
    if (mask == limit) break;
  }
  return out;
}

void LwFilterConfig::validate() const {
  if (num_particles < 1) throw std::invalid_argument("lw config: need at least one particle");
  if (sweeps < 0) throw std::invalid_argument("lw config: sweeps must be >= 0");
  if (!(mh_sigma > 0.0)) throw std::invalid_argument("lw config: mh sigma must be positive");
  if (!(ess_fraction >= 0.0) || !(ess_fraction <= 1.0)) {
    throw std::invalid_argument("lw config: ess fraction must lie in [0,1]");
  }
  if (!(prior_alpha > 0.0) || !(prior_beta > 0.0)) {
    throw std::invalid_argument("lw config: Beta prior parameters must be positive");
  }
  world_prior.validate();
}

double lw_frame_log_likelihood(const LwFrame& frame, const LwWorldState& world,
                               const LwTheta& theta) {
  const std::size_t c = theta.size();
  if (frame.detected.size() != c || world.size() != c) {
    throw std::invalid_argument("lw likelihood: dimension mismatch");
  }
  double ll = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    double p;
    if (world.presence[i]) {
      p = frame.detected[i] ? 1.0 - theta.miss_probs[i] : theta.miss_probs[i];
    } else {
      p = frame.detected[i] ? theta.halluc_probs[i] : 1.0 - theta.halluc_probs[i];
    }
    ll += std::log(p);
  }
  return ll;
}

namespace {

// Per-category sufficient statistics of Bernoulli frames:
// [present&detected, present&undetected, absent&detected, absent&undetected].
using CatStats = std::array<long, 4>;

struct LwParticle {
  std::vector<double> theta;      // H_0..H_{C-1}, M_0..M_{C-1}
  std::vector<double> log_theta;  // cached log(theta)
  std::vector<double> log_comp;   // cached log(1 - theta)
  std::vector<double> log_mass;   // cached log normal mass of (0,1) around theta
  std::vector<CatStats> stats;    // frozen past worlds
  std::uint32_t hyp_mask = 0;
  double logw = 0.0;
};

double world_ll_from_counts(const LwParticle& p, std::uint32_t mask,
                            std::span<const long> ndet, long f, std::size_t c) {
  double ll = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    const long d = ndet[i];
    const long u = f - d;
    if (mask & (1u << i)) {
      // present: detected -> 1-M, undetected -> M
      ll += static_cast<double>(d) * p.log_comp[c + i] + static_cast<double>(u) * p.log_theta[c + i];
    } else {
      ll += static_cast<double>(d) * p.log_theta[i] + static_cast<double>(u) * p.log_comp[i];
    }
  }
  return ll;
}

}  // namespace

LwResult lw_run_filter(std::span<const std::vector<LwFrame>> worlds_frames,
                       const LwFilterConfig& cfg, Rng& rng) {
  cfg.validate();
  if (worlds_frames.empty()) throw std::invalid_argument("lw filter: no world states");
  const std::size_t c = cfg.world_prior.num_categories;
  for (const auto& frames : worlds_frames) {
    if (frames.empty()) throw std::invalid_argument("lw filter: world with no frames");
    for (const auto& f : frames) {
      if (f.detected.size() != c) throw std::invalid_argument("lw filter: frame dimension mismatch");
    }
  }
  const std::size_t m = static_cast<std::size_t>(cfg.num_particles);
  const double sigma = cfg.mh_sigma;

  std::vector<LwParticle> particles(m);
  for (auto& p : particles) {
    p.theta.resize(2 * c);
    p.log_theta.resize(2 * c);
    p.log_comp.resize(2 * c);
    p.log_mass.resize(2 * c);
    p.stats.assign(c, CatStats{0, 0, 0, 0});
    for (std::size_t e = 0; e < 2 * c; ++e) {
      const double v = rng.beta(cfg.prior_alpha, cfg.prior_beta);
      p.theta[e] = v;
      p.log_theta[e] = std::log(v);
      p.log_comp[e] = std::log1p(-v);
      p.log_mass[e] = log_interval_mass(v, sigma);
    }
  }

  LwResult result;
  result.inferred.reserve(worlds_frames.size());
  result.theta_trajectory.reserve(worlds_frames.size());

  std::vector<long> ndet(c);
  std::vector<double> logw(m);
  std::vector<std::uint32_t> masks(m);

  for (const auto& frames : worlds_frames) {
    const long f = static_cast<long>(frames.size());
    std::fill(ndet.begin(), ndet.end(), 0L);
    for (const auto& fr : frames) {
      for (std::size_t i = 0; i < c; ++i) ndet[i] += fr.detected[i] ? 1 : 0;
    }

    // Propose hypotheses from the world prior and weight.
    for (std::size_t i = 0; i < m; ++i) {
      auto& p = particles[i];
      p.hyp_mask = world_mask(cfg.world_prior.sample(rng));
      p.logw += world_ll_from_counts(p, p.hyp_mask, ndet, f, c);
      logw[i] = p.logw;
      masks[i] = p.hyp_mask;
    }
    const std::vector<double> weights = normalized_weights(logw);

    // World estimate from the pre-resample weighted ensemble.
    result.inferred.push_back(weighted_mode(masks, weights, c));

    double ess = 0.0;
    for (double w : weights) ess += w * w;
    ess = 1.0 / ess;
    if (ess < cfg.ess_fraction * static_cast<double>(m)) {
      const double lz = logsumexp(logw);
      const auto idx = systematic_resample(weights, rng);
      std::vector<LwParticle> next(m);
      for (std::size_t i = 0; i < m; ++i) next[i] = particles[idx[i]];
      particles = std::move(next);
      const double equal_logw =
          (lz == kNegInf ? 0.0 : lz) - std::log(static_cast<double>(m));
      for (auto& p : particles) p.logw = equal_logw;
    }

    // Rejuvenate theta against all evidence so far (frozen stats plus the
    // current world's counts under the particle's hypothesis).
    for (auto& p : particles) {
      for (int sweep = 0; sweep < cfg.sweeps; ++sweep) {
        const auto order = rng.permutation(2 * c);
        for (std::size_t e : order) {
          const std::size_t cat = e % c;
          const bool is_miss = e >= c;
          const double cur = p.theta[e];
          const double prop = rng.truncated_normal(cur, sigma, 0.0, 1.0);
          const double log_prop = std::log(prop);
          const double log_prop_comp = std::log1p(-prop);
          // counts multiplying log(theta_e) and log(1-theta_e)
          long n_theta, n_comp;
          const CatStats& s = p.stats[cat];
          long cur_pd = 0, cur_pu = 0, cur_ad = 0, cur_au = 0;
          if (p.hyp_mask & (1u << cat)) {
            cur_pd = ndet[cat];
            cur_pu = f - ndet[cat];
          } else {
            cur_ad = ndet[cat];
            cur_au = f - ndet[cat];
          }
          if (is_miss) {
            n_theta = s[1] + cur_pu;  // present & undetected
            n_comp = s[0] + cur_pd;   // present & detected
          } else {
            n_theta = s[2] + cur_ad;  // absent & detected
            n_comp = s[3] + cur_au;   // absent & undetected
          }
          double log_ratio =
              static_cast<double>(n_theta) * (log_prop - p.log_theta[e]) +
              static_cast<double>(n_comp) * (log_prop_comp - p.log_comp[e]);
          log_ratio += (cfg.prior_alpha - 1.0) * (log_prop - p.log_theta[e]) +
                       (cfg.prior_beta - 1.0) * (log_prop_comp - p.log_comp[e]);
          const double prop_log_mass = log_interval_mass(prop, sigma);
          log_ratio += p.log_mass[e] - prop_log_mass;
          if (std::log(rng.uniform()) < log_ratio) {
            p.theta[e] = prop;
            p.log_theta[e] = log_prop;
            p.log_comp[e] = log_prop_comp;
            p.log_mass[e] = prop_log_mass;
          }
        }
      }
    }

    // Theta estimate from the post-rejuvenation ensemble.
    for (std::size_t i = 0; i < m; ++i) logw[i] = particles[i].logw;
    const std::vector<double> west = normalized_weights(logw);
    LwTheta est;
    est.halluc_probs.assign(c, 0.0);
    est.miss_probs.assign(c, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t cat = 0; cat < c; ++cat) {
        est.halluc_probs[cat] += west[i] * particles[i].theta[cat];
        est.miss_probs[cat] += west[i] * particles[i].theta[c + cat];
      }
    }
    result.theta_trajectory.push_back(std::move(est));

    // Freeze the current world's evidence into the sufficient statistics.
    for (auto& p : particles) {
      for (std::size_t cat = 0; cat < c; ++cat) {
        if (p.hyp_mask & (1u << cat)) {
          p.stats[cat][0] += ndet[cat];
          p.stats[cat][1] += f - ndet[cat];
        } else {
          p.stats[cat][2] += ndet[cat];
          p.stats[cat][3] += f - ndet[cat];
        }
      }
    }
  }

  result.theta_final = result.theta_trajectory.back();
  return result;
}

std::vector<LwWorldState> lw_reinfer(std::span<const std::vector<LwFrame>> worlds_frames,
                                     const LwTheta& theta_fixed, const LwFilterConfig& cfg,
                                     Rng& rng) {
  cfg.validate();
  theta_fixed.validate();
  const std::size_t c = cfg.world_prior.num_categories;
  if (theta_fixed.size() != c) throw std::invalid_argument("lw reinfer: theta dimension mismatch");

  std::vector<LwWorldState> out;
  out.reserve(worlds_frames.size());

  if (cfg.exact_enumeration) {
    const auto worlds = cfg.world_prior.enumerate();
    std::vector<double> log_priors(worlds.size());
    for (std::size_t i = 0; i < worlds.size(); ++i) {
      log_priors[i] = cfg.world_prior.log_prob(worlds[i]);
    }
    for (const auto& frames : worlds_frames) {
      if (frames.empty()) throw std::invalid_argument("lw reinfer: world with no frames");
      double best = kNegInf;
      std::size_t best_i = 0;
      bool found = false;
      for (std::size_t i = 0; i < worlds.size(); ++i) {
        double lp = log_priors[i];
        for (const auto& fr : frames) lp += lw_frame_log_likelihood(fr, worlds[i], theta_fixed);
        if (lp > best) {
          best = lp;
          best_i = i;
          found = true;
        }
      }
      if (found && best != kNegInf) {
        out.push_back(worlds[best_i]);
      } else {
        LwWorldState empty;
        empty.presence.assign(c, 0);
        out.push_back(std::move(empty));
      }
    }
    return out;
  }

  const std::size_t m = static_cast<std::size_t>(cfg.num_particles);
  std::vector<double> logw(m);
  std::vector<std::uint32_t> masks(m);
  LwWorldState hyp;
  for (const auto& frames : worlds_frames) {
    if (frames.empty()) throw std::invalid_argument("lw reinfer: world with no frames");
    for (std::size_t i = 0; i < m; ++i) {
      hyp = cfg.world_prior.sample(rng);
      masks[i] = world_mask(hyp);
      double ll = 0.0;
      for (const auto& fr : frames) ll += lw_frame_log_likelihood(fr, hyp, theta_fixed);
      logw[i] = ll;
    }
    const std::vector<double> weights = normalized_weights(logw);
    const double lz = logsumexp(logw);
    if (lz == kNegInf) {
      LwWorldState empty;
      empty.presence.assign(c, 0);
      out.push_back(std::move(empty));
    } else {
      out.push_back(weighted_mode(masks, weights, c));
    }
  }
  return out;
}

std::vector<double> lw_enumeration_posterior(std::span<const LwFrame> frames,
                                             const LwTheta& theta, const LwWorldPrior& prior) {
  theta.validate();
  if (theta.size() != prior.num_categories) {
    throw std::invalid_argument("lw posterior: theta dimension mismatch");
  }
  const auto worlds = prior.enumerate();
  std::vector<double> lp(worlds.size());
  for (std::size_t i = 0; i < worlds.size(); ++i) {
    lp[i] = prior.log_prob(worlds[i]);
    for (const auto& fr : frames) lp[i] += lw_frame_log_likelihood(fr, worlds[i], theta);
  }
  return normalized_weights(lp);
}

std::vector<double> lw_sampled_posterior(std::span<const LwFrame> frames, const LwTheta& theta,
                                         const LwWorldPrior& prior, int num_particles, Rng& rng) {
  theta.validate();
  if (theta.size() != prior.num_categories) {
    throw std::invalid_argument("lw posterior: theta dimension mismatch");
  }
  if (num_particles < 1) throw std::invalid_argument("lw posterior: need at least one particle");
  const auto worlds = prior.enumerate();
  std::vector<std::size_t> slot_of_mask(worlds.empty() ? 0 : world_mask(worlds.back()) + 1, 0);
  for (std::size_t i = 0; i < worlds.size(); ++i) slot_of_mask[world_mask(worlds[i])] = i;

  const std::size_t m = static_cast<std::size_t>(num_particles);
  std::vector<double> logw(m);
  std::vector<std::size_t> slots(m);
  for (std::size_t i = 0; i < m; ++i) {
    const LwWorldState hyp = prior.sample(rng);
    slots[i] = slot_of_mask[world_mask(hyp)];
    double ll = 0.0;
    for (const auto& fr : frames) ll += lw_frame_log_likelihood(fr, hyp, theta);
    logw[i] = ll;
  }
  const std::vector<double> weights = normalized_weights(logw);
  std::vector<double> marginals(worlds.size(), 0.0);
  for (std::size_t i = 0; i < m; ++i) marginals[slots[i]] += weights[i];
  return marginals;
}

}  // namespace metacog
