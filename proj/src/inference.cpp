#include "metacog/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "metacog/diff.hpp"
#include "metacog/parallel.hpp"

namespace metacog {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::uint64_t kInitTag = 0xE;
constexpr std::uint64_t kPropagateTag = 0xA;
constexpr std::uint64_t kResampleTag = 0xB;
constexpr std::uint64_t kRejuvenateTag = 0xC;

double logsumexp(std::span<const double> v) {
  double mx = kNegInf;
  for (double x : v) mx = std::max(mx, x);
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

double logaddexp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
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

Vec3 uniform_in_bounds(const RoomBounds& bounds, Rng& rng) {
  return {rng.uniform(bounds.x_min, bounds.x_max), rng.uniform(bounds.y_min, bounds.y_max),
          rng.uniform(bounds.z_min, bounds.z_max)};
}

struct RaySegment {
  Vec3 origin;
  Vec3 dir;
  double t0 = 0.0;
  double t1 = 0.0;
  bool valid = false;
};

void clip_axis(double o, double d, double lo, double hi, double& t0, double& t1, bool& ok) {
  if (std::abs(d) < 1e-12) {
    if (o < lo || o > hi) ok = false;
    return;
  }
  double ta = (lo - o) / d;
  double tb = (hi - o) / d;
  if (ta > tb) std::swap(ta, tb);
  t0 = std::max(t0, ta);
  t1 = std::min(t1, tb);
}

RaySegment clip_ray_to_bounds(const Detection2D& det, const CameraPose& pose,
                              const CameraIntrinsics& intr, const RoomBounds& bounds) {
  RaySegment seg;
  const Ray ray = backproject(Pixel{det.x, det.y}, pose, intr);
  seg.origin = ray.origin;
  seg.dir = ray.direction;
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  bool ok = true;
  clip_axis(seg.origin.x, seg.dir.x, bounds.x_min, bounds.x_max, t0, t1, ok);
  clip_axis(seg.origin.y, seg.dir.y, bounds.y_min, bounds.y_max, t0, t1, ok);
  clip_axis(seg.origin.z, seg.dir.z, bounds.z_min, bounds.z_max, t0, t1, ok);
  seg.t0 = t0;
  seg.t1 = t1;
  seg.valid = ok && (t1 - t0 > 1e-9);
  return seg;
}

// Everything per-scene that the rejuvenation moves share: detection counts,
// per-category detection/pose lists, and proposal densities.
struct SceneContext {
  const SceneData* scene = nullptr;
  const CameraIntrinsics* intr = nullptr;
  const NoiseModel* noise = nullptr;
  const ScenePrior* prior = nullptr;
  double line_sigma_sq = 0.01;
  double location_sigma = 0.01;
  long total_detections = 0;
  std::vector<long> category_counts;
  std::vector<std::vector<std::pair<const Detection2D*, const CameraPose*>>> by_category;
  double log_volume = 0.0;
};

SceneContext build_scene_context(const SceneData& scene, const FilterConfig& cfg,
                                 const CameraIntrinsics& intr, const NoiseModel& noise) {
  SceneContext ctx;
  ctx.scene = &scene;
  ctx.intr = &intr;
  ctx.noise = &noise;
  ctx.prior = &cfg.scene_prior;
  ctx.line_sigma_sq = cfg.line_sigma_sq;
  ctx.location_sigma = cfg.location_sigma;
  const std::size_t c = cfg.scene_prior.num_categories;
  ctx.category_counts.assign(c, 0);
  ctx.by_category.resize(c);
  for (const auto& frame : scene.frames) {
    for (const auto& det : frame.detections) {
      if (det.category >= c) {
        throw std::invalid_argument("inference: detection category out of range");
      }
      ++ctx.category_counts[det.category];
      ++ctx.total_detections;
      ctx.by_category[det.category].emplace_back(&det, &frame.camera);
    }
  }
  ctx.log_volume = std::log(cfg.scene_prior.bounds.volume());
  return ctx;
}

double log_mean_ray_density(const SceneContext& ctx, std::size_t cat, const Vec3& x) {
  const auto& dets = ctx.by_category[cat];
  double acc = kNegInf;
  for (const auto& [det, pose] : dets) {
    acc = logaddexp(acc, ray_proposal_log_density(x, *det, *pose, *ctx.intr,
                                                  ctx.prior->bounds, ctx.line_sigma_sq));
  }
  return acc - std::log(static_cast<double>(dets.size()));
}

// Density of the new-object location draw for a category (mixture of uniform
// and the per-detection ray proposals).
double add_location_log_density(const SceneContext& ctx, std::size_t cat, const Vec3& x) {
  if (ctx.by_category[cat].empty()) return -ctx.log_volume;
  constexpr double kLogHalf = -0.6931471805599453;
  return logaddexp(kLogHalf - ctx.log_volume, kLogHalf + log_mean_ray_density(ctx, cat, x));
}

Vec3 sample_add_location(const SceneContext& ctx, std::size_t cat, Rng& rng) {
  const auto& dets = ctx.by_category[cat];
  if (dets.empty()) {
    return propose_location(std::nullopt, ctx.scene->frames.front().camera, *ctx.intr,
                            ctx.prior->bounds, ctx.line_sigma_sq, rng);
  }
  const auto i = static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(dets.size()) - 1));
  return propose_location(*dets[i].first, *dets[i].second, *ctx.intr, ctx.prior->bounds,
                          ctx.line_sigma_sq, rng);
}

// Ray-only redraw used by the location move (uniform when the category has
// no detections in the scene).
double redraw_log_density(const SceneContext& ctx, std::size_t cat, const Vec3& x) {
  if (ctx.by_category[cat].empty()) return -ctx.log_volume;
  return log_mean_ray_density(ctx, cat, x);
}

Vec3 sample_redraw(const SceneContext& ctx, std::size_t cat, Rng& rng) {
  const auto& dets = ctx.by_category[cat];
  if (dets.empty()) return uniform_in_bounds(ctx.prior->bounds, rng);
  const auto i = static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(dets.size()) - 1));
  return sample_ray_proposal(*dets[i].first, *dets[i].second, *ctx.intr, ctx.prior->bounds,
                             ctx.line_sigma_sq, rng);
}

double gaussian3_log_density(const Vec3& delta, double sigma) {
  const double s2 = sigma * sigma;
  const double q = (delta.x * delta.x + delta.y * delta.y + delta.z * delta.z) / (2.0 * s2);
  return -1.5 * std::log(2.0 * M_PI * s2) - q;
}

// Weights for the data-driven category proposal; zero when a category cannot
// produce detections.
std::vector<double> category_proposal_weights(std::span<const long> counts, const Theta& theta) {
  if (counts.size() != theta.size()) {
    throw std::invalid_argument("category proposal: dimension mismatch");
  }
  std::vector<double> w(counts.size(), 0.0);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const double p = theta.det_rates[c];
    const double denom = p - std::expm1(-theta.halluc_rates[c]);
    if (p > 0.0 && denom > 0.0) {
      const double k = static_cast<double>(std::max<long>(1, counts[c]));
      w[c] = k * p / denom;
    }
  }
  return w;
}

// Mutable chain state for one particle during rejuvenation; caches the
// posterior terms and per-object match counts so proposals only recompute
// what a move invalidates.
struct Chain {
  Particle p;
  double scene_ll = 0.0;
  double world_lp = 0.0;
  std::vector<int> matches;
  bool matches_valid = false;
};

const std::vector<int>& current_matches(Chain& chain, const SceneContext& ctx) {
  if (!chain.matches_valid) {
    chain.matches = scene_match_counts(*ctx.scene, chain.p.world, *ctx.intr, *ctx.noise);
    chain.matches_valid = true;
  }
  return chain.matches;
}

double removal_weight(int match_count) { return 1.0 / (1.0 + static_cast<double>(match_count)); }

void world_move(Chain& chain, const SceneContext& ctx, Rng& rng, MoveStats& stats) {
  const Theta& theta = chain.p.theta_current;
  const double pa = p_add(theta, ctx.total_detections);
  const std::vector<double> catw = category_proposal_weights(ctx.category_counts, theta);
  double catw_sum = 0.0;
  for (double w : catw) catw_sum += w;

  ++stats.world_proposed;
  if (rng.uniform() < pa) {
    // Addition. A degenerate category proposal means no addition can be
    // made (and no removal reversed), so the move is a guaranteed reject.
    if (catw_sum <= 0.0 || pa <= 0.0) return;
    const std::size_t cat = rng.categorical(catw);
    const Vec3 pos = sample_add_location(ctx, cat, rng);

    WorldState proposed = chain.p.world;
    proposed.objects.push_back({pos, cat});
    const double new_lp = world_log_prior(proposed, *ctx.prior);
    if (new_lp == kNegInf) return;
    const double new_ll = scene_log_likelihood(*ctx.scene, proposed, theta, *ctx.intr, *ctx.noise);
    const std::vector<int> new_matches = scene_match_counts(*ctx.scene, proposed, *ctx.intr, *ctx.noise);
    double removal_sum = 0.0;
    for (int m : new_matches) removal_sum += removal_weight(m);
    const double q_fwd = std::log(pa) + std::log(catw[cat] / catw_sum) +
                         add_location_log_density(ctx, cat, pos);
    const double q_rev =
        std::log1p(-pa) + std::log(removal_weight(new_matches.back()) / removal_sum);
    const double log_alpha = (new_ll + new_lp) - (chain.scene_ll + chain.world_lp) + q_rev - q_fwd;
    if (std::log(rng.uniform()) < log_alpha) {
      chain.p.world = std::move(proposed);
      chain.scene_ll = new_ll;
      chain.world_lp = new_lp;
      chain.matches = new_matches;
      chain.matches_valid = true;
      ++stats.world_accepted;
    }
  } else {
    if (chain.p.world.objects.empty()) return;
    const std::vector<int>& matches = current_matches(chain, ctx);
    std::vector<double> remw(matches.size());
    double rem_sum = 0.0;
    for (std::size_t i = 0; i < matches.size(); ++i) {
      remw[i] = removal_weight(matches[i]);
      rem_sum += remw[i];
    }
    const std::size_t victim = rng.categorical(remw);
    const std::size_t cat = chain.p.world.objects[victim].category;
    const Vec3 pos = chain.p.world.objects[victim].position;

    // Reversing a removal requires the addition machinery to be able to
    // produce this category at all.
    if (catw_sum <= 0.0 || catw[cat] <= 0.0 || pa <= 0.0 || pa >= 1.0) return;

    WorldState proposed = chain.p.world;
    proposed.objects.erase(proposed.objects.begin() + static_cast<std::ptrdiff_t>(victim));
    const double new_lp = world_log_prior(proposed, *ctx.prior);
    const double new_ll = scene_log_likelihood(*ctx.scene, proposed, theta, *ctx.intr, *ctx.noise);
    const double q_fwd = std::log1p(-pa) + std::log(remw[victim] / rem_sum);
    const double q_rev = std::log(pa) + std::log(catw[cat] / catw_sum) +
                         add_location_log_density(ctx, cat, pos);
    const double log_alpha = (new_ll + new_lp) - (chain.scene_ll + chain.world_lp) + q_rev - q_fwd;
    if (std::log(rng.uniform()) < log_alpha) {
      chain.p.world = std::move(proposed);
      chain.scene_ll = new_ll;
      chain.world_lp = new_lp;
      chain.matches_valid = false;
      ++stats.world_accepted;
    }
  }
}

void location_move(Chain& chain, const SceneContext& ctx, Rng& rng, MoveStats& stats) {
  auto& objects = chain.p.world.objects;
  if (objects.empty()) return;
  ++stats.location_proposed;
  const auto idx = static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(objects.size()) - 1));
  const std::size_t cat = objects[idx].category;
  const Vec3 old_pos = objects[idx].position;

  Vec3 new_pos;
  if (rng.uniform() < 0.5) {
    new_pos = {old_pos.x + rng.normal(0.0, ctx.location_sigma),
               old_pos.y + rng.normal(0.0, ctx.location_sigma),
               old_pos.z + rng.normal(0.0, ctx.location_sigma)};
  } else {
    new_pos = sample_redraw(ctx, cat, rng);
  }

  constexpr double kLogHalf = -0.6931471805599453;
  const Vec3 delta = new_pos - old_pos;
  const double step_ld = gaussian3_log_density(delta, ctx.location_sigma);
  const double q_fwd = logaddexp(kLogHalf + step_ld, kLogHalf + redraw_log_density(ctx, cat, new_pos));
  const double q_rev = logaddexp(kLogHalf + step_ld, kLogHalf + redraw_log_density(ctx, cat, old_pos));

  WorldState proposed = chain.p.world;
  proposed.objects[idx].position = new_pos;
  const double new_lp = world_log_prior(proposed, *ctx.prior);
  if (new_lp == kNegInf) return;
  const double new_ll =
      scene_log_likelihood(*ctx.scene, proposed, chain.p.theta_current, *ctx.intr, *ctx.noise);
  const double log_alpha = (new_ll + new_lp) - (chain.scene_ll + chain.world_lp) + q_rev - q_fwd;
  if (std::log(rng.uniform()) < log_alpha) {
    chain.p.world = std::move(proposed);
    chain.scene_ll = new_ll;
    chain.world_lp = new_lp;
    chain.matches_valid = false;
    ++stats.location_accepted;
  }
}

// Independence redraw of both theta samples from their conjugate beliefs.
// Proposal and prior cancel, so the ratio is pure likelihood (and only
// theta_current enters the likelihood).
void theta_move(Chain& chain, const SceneContext& ctx, Rng& rng, MoveStats& stats) {
  ++stats.theta_proposed;
  Theta proposal = sample_theta(chain.p.beliefs, rng);
  Theta previous = sample_theta(chain.p.beliefs_previous, rng);
  const double new_ll =
      scene_log_likelihood(*ctx.scene, chain.p.world, proposal, *ctx.intr, *ctx.noise);
  const double log_alpha = new_ll - chain.scene_ll;
  if (std::log(rng.uniform()) < log_alpha) {
    chain.p.theta_current = std::move(proposal);
    chain.p.theta_previous = std::move(previous);
    chain.scene_ll = new_ll;
    ++stats.theta_accepted;
  }
}

Particle rejuvenate_with_context(const Particle& particle, const SceneContext& ctx,
                                 const FilterConfig& cfg, Rng& rng, bool fix_theta,
                                 MoveStats* stats) {
  Chain chain;
  chain.p = particle;
  chain.scene_ll = scene_log_likelihood(*ctx.scene, chain.p.world, chain.p.theta_current,
                                        *ctx.intr, *ctx.noise);
  chain.world_lp = world_log_prior(chain.p.world, *ctx.prior);
  MoveStats local;
  for (int sweep = 0; sweep < cfg.rejuvenation_sweeps; ++sweep) {
    world_move(chain, ctx, rng, local);
    location_move(chain, ctx, rng, local);
    if (!fix_theta) theta_move(chain, ctx, rng, local);
  }
  if (stats) {
    stats->world_proposed += local.world_proposed;
    stats->world_accepted += local.world_accepted;
    stats->location_proposed += local.location_proposed;
    stats->location_accepted += local.location_accepted;
    stats->theta_proposed += local.theta_proposed;
    stats->theta_accepted += local.theta_accepted;
  }
  return std::move(chain.p);
}

double posterior_score(const Particle& p, const SceneData& scene, const FilterConfig& cfg,
                       const CameraIntrinsics& intr, const NoiseModel& noise) {
  return scene_log_likelihood(scene, p.world, p.theta_current, intr, noise) +
         world_log_prior(p.world, cfg.scene_prior);
}

std::size_t pick_world_estimate(std::span<const Particle> particles, const SceneData& scene,
                                const FilterConfig& cfg, const CameraIntrinsics& intr,
                                const NoiseModel& noise) {
  std::size_t best = 0;
  if (cfg.estimator == FilterConfig::WorldEstimator::kHighestWeight) {
    for (std::size_t m = 1; m < particles.size(); ++m) {
      if (particles[m].log_weight > particles[best].log_weight) best = m;
    }
  } else {
    double best_score = posterior_score(particles[0], scene, cfg, intr, noise);
    for (std::size_t m = 1; m < particles.size(); ++m) {
      const double s = posterior_score(particles[m], scene, cfg, intr, noise);
      if (s > best_score) {
        best_score = s;
        best = m;
      }
    }
  }
  return best;
}

struct WeightSummary {
  std::vector<double> normalized;
  double log_total = kNegInf;
  double ess = 0.0;
};

WeightSummary summarize_weights(std::span<const Particle> particles) {
  WeightSummary ws;
  std::vector<double> logw(particles.size());
  for (std::size_t i = 0; i < particles.size(); ++i) logw[i] = particles[i].log_weight;
  ws.log_total = logsumexp(logw);
  ws.normalized.resize(particles.size());
  if (ws.log_total == kNegInf) {
    std::fill(ws.normalized.begin(), ws.normalized.end(),
              1.0 / static_cast<double>(particles.size()));
  } else {
    for (std::size_t i = 0; i < particles.size(); ++i) {
      ws.normalized[i] = std::exp(logw[i] - ws.log_total);
    }
  }
  double sq = 0.0;
  for (double w : ws.normalized) sq += w * w;
  ws.ess = 1.0 / sq;
  return ws;
}

void check_scenes(std::span<const SceneData> scenes, std::size_t num_categories) {
  for (const auto& scene : scenes) {
    if (scene.frames.empty()) throw std::invalid_argument("inference: scene with no frames");
    for (const auto& frame : scene.frames) {
      for (const auto& det : frame.detections) {
        if (det.category >= num_categories) {
          throw std::invalid_argument("inference: detection category out of range");
        }
      }
    }
  }
}

}  // namespace

void FilterConfig::validate() const {
  if (num_particles < 1) throw std::invalid_argument("filter config: need at least one particle");
  if (rejuvenation_sweeps < 0) throw std::invalid_argument("filter config: negative sweep count");
  if (!(location_sigma > 0.0)) throw std::invalid_argument("filter config: location sigma must be positive");
  if (!(line_sigma_sq > 0.0)) throw std::invalid_argument("filter config: line variance must be positive");
  if (!(ess_fraction >= 0.0) || !(ess_fraction <= 1.0)) {
    throw std::invalid_argument("filter config: ess fraction must lie in [0,1]");
  }
  scene_prior.validate();
}

double p_add(const Theta& theta, long total_detections) {
  if (total_detections < 0) throw std::invalid_argument("p_add: negative detection count");
  double lambda_total = 0.0;
  for (double l : theta.halluc_rates) lambda_total += l;
  if (lambda_total <= 0.0) return 0.5;
  double term = std::exp(-lambda_total);
  double cdf = term;
  for (long i = 1; i <= total_detections; ++i) {
    term *= lambda_total / static_cast<double>(i);
    cdf += term;
  }
  return 0.5 * std::min(cdf, 1.0);
}

std::size_t propose_category(std::span<const long> category_counts, const Theta& theta,
                             Rng& rng) {
  const std::vector<double> w = category_proposal_weights(category_counts, theta);
  double sum = 0.0;
  for (double x : w) sum += x;
  if (!(sum > 0.0)) {
    throw std::invalid_argument("category proposal: degenerate weights (no detectable category)");
  }
  return rng.categorical(w);
}

Vec3 sample_ray_proposal(const Detection2D& det, const CameraPose& pose,
                         const CameraIntrinsics& intr, const RoomBounds& bounds,
                         double line_sigma_sq, Rng& rng) {
  bounds.validate();
  if (!(line_sigma_sq > 0.0)) throw std::invalid_argument("ray proposal: variance must be positive");
  const RaySegment seg = clip_ray_to_bounds(det, pose, intr, bounds);
  if (!seg.valid) return uniform_in_bounds(bounds, rng);
  const double t = rng.uniform(seg.t0, seg.t1);
  const Vec3 base = seg.origin + seg.dir * t;
  const Vec3 helper = std::abs(seg.dir.x) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
  const Vec3 u = seg.dir.cross(helper).normalized();
  const Vec3 v = seg.dir.cross(u);
  const double sigma = std::sqrt(line_sigma_sq);
  return base + u * rng.normal(0.0, sigma) + v * rng.normal(0.0, sigma);
}

double ray_proposal_log_density(const Vec3& x, const Detection2D& det, const CameraPose& pose,
                                const CameraIntrinsics& intr, const RoomBounds& bounds,
                                double line_sigma_sq) {
  bounds.validate();
  if (!(line_sigma_sq > 0.0)) throw std::invalid_argument("ray proposal: variance must be positive");
  const RaySegment seg = clip_ray_to_bounds(det, pose, intr, bounds);
  if (!seg.valid) return -std::log(bounds.volume());
  const Vec3 rel = x - seg.origin;
  const double t = rel.dot(seg.dir);
  if (t < seg.t0 || t > seg.t1) return kNegInf;
  const double perp_sq = std::max(0.0, rel.dot(rel) - t * t);
  return -std::log(seg.t1 - seg.t0) - std::log(2.0 * M_PI * line_sigma_sq) -
         perp_sq / (2.0 * line_sigma_sq);
}

Vec3 propose_location(const std::optional<Detection2D>& detection, const CameraPose& pose,
                      const CameraIntrinsics& intr, const RoomBounds& bounds,
                      double line_sigma_sq, Rng& rng) {
  bounds.validate();
  if (!(bounds.volume() > 0.0)) throw std::invalid_argument("location proposal: zero-volume room");
  if (!detection.has_value()) return uniform_in_bounds(bounds, rng);
  if (rng.uniform() < 0.5) return uniform_in_bounds(bounds, rng);
  return sample_ray_proposal(*detection, pose, intr, bounds, line_sigma_sq, rng);
}

Particle rejuvenate(const Particle& particle, const SceneData& scene, const FilterConfig& cfg,
                    const CameraIntrinsics& intr, const NoiseModel& noise, Rng& rng,
                    bool fix_theta, MoveStats* stats) {
  cfg.validate();
  if (scene.frames.empty()) throw std::invalid_argument("rejuvenate: scene with no frames");
  const SceneContext ctx = build_scene_context(scene, cfg, intr, noise);
  return rejuvenate_with_context(particle, ctx, cfg, rng, fix_theta, stats);
}

Theta estimate_V(std::span<const Particle> particles) {
  if (particles.empty()) throw std::invalid_argument("estimate: no particles");
  std::vector<double> logw(particles.size());
  for (std::size_t i = 0; i < particles.size(); ++i) logw[i] = particles[i].log_weight;
  const double lz = logsumexp(logw);
  if (lz == kNegInf) {
    throw std::runtime_error("estimate: degenerate ensemble (all weights are -inf)");
  }
  const std::size_t c = particles[0].theta_current.size();
  Theta mean;
  mean.halluc_rates.assign(c, 0.0);
  mean.det_rates.assign(c, 0.0);
  for (std::size_t i = 0; i < particles.size(); ++i) {
    const double w = std::exp(logw[i] - lz);
    const Theta& t = particles[i].theta_current;
    if (t.size() != c) throw std::invalid_argument("estimate: theta dimension mismatch");
    for (std::size_t j = 0; j < c; ++j) {
      mean.halluc_rates[j] += w * t.halluc_rates[j];
      mean.det_rates[j] += w * t.det_rates[j];
    }
  }
  return mean;
}

InferenceResult run_filter(std::span<const SceneData> scenes, const FilterConfig& cfg,
                           const CameraIntrinsics& intr, const NoiseModel& noise) {
  cfg.validate();
  intr.validate();
  noise.validate();
  if (scenes.empty()) throw std::invalid_argument("filter: no scenes");
  const std::size_t c = cfg.scene_prior.num_categories;
  check_scenes(scenes, c);

  const std::size_t m = static_cast<std::size_t>(cfg.num_particles);
  std::vector<Particle> particles(m);
  for (std::size_t i = 0; i < m; ++i) {
    Rng rng(derive_seed(cfg.seed, {kInitTag, i}));
    particles[i].beliefs = prior_beliefs(c);
    particles[i].beliefs_previous = prior_beliefs(c);
    particles[i].theta_current = sample_theta(particles[i].beliefs, rng);
    particles[i].theta_previous = particles[i].theta_current;
  }

  InferenceResult result;
  result.inferred.reserve(scenes.size());
  result.theta_trajectory.reserve(scenes.size());
  result.diagnostics.reserve(scenes.size());

  std::vector<MoveStats> stats(m);
  for (std::size_t t = 0; t < scenes.size(); ++t) {
    const SceneData& scene = scenes[t];
    const SceneContext ctx = build_scene_context(scene, cfg, intr, noise);

    parallel_for(m, [&](std::size_t i) {
      Rng rng(derive_seed(cfg.seed, {kPropagateTag, t, i}));
      Particle& p = particles[i];
      p.world = sample_world_prior(cfg.scene_prior, rng);
      p.theta_previous = p.theta_current;
      p.theta_current = sample_theta(p.beliefs, rng);
      p.log_weight += scene_log_likelihood(scene, p.world, p.theta_current, intr, noise);
    });

    SceneDiagnostics diag;
    const WeightSummary ws = summarize_weights(particles);
    diag.ess = ws.ess;
    if (ws.log_total != kNegInf &&
        ws.ess < cfg.ess_fraction * static_cast<double>(m)) {
      Rng rng(derive_seed(cfg.seed, {kResampleTag, t}));
      const auto idx = systematic_resample(ws.normalized, rng);
      std::vector<Particle> next(m);
      for (std::size_t i = 0; i < m; ++i) next[i] = particles[idx[i]];
      particles = std::move(next);
      const double equal = ws.log_total - std::log(static_cast<double>(m));
      for (auto& p : particles) p.log_weight = equal;
      diag.resampled = true;
    }

    std::fill(stats.begin(), stats.end(), MoveStats{});
    parallel_for(m, [&](std::size_t i) {
      Rng rng(derive_seed(cfg.seed, {kRejuvenateTag, t, i}));
      particles[i] = rejuvenate_with_context(particles[i], ctx, cfg, rng, false, &stats[i]);
    });
    MoveStats total;
    for (const auto& s : stats) {
      total.world_proposed += s.world_proposed;
      total.world_accepted += s.world_accepted;
      total.location_proposed += s.location_proposed;
      total.location_accepted += s.location_accepted;
      total.theta_proposed += s.theta_proposed;
      total.theta_accepted += s.theta_accepted;
    }
    const auto rate = [](long acc, long prop) {
      return prop > 0 ? static_cast<double>(acc) / static_cast<double>(prop) : 0.0;
    };
    diag.world_accept_rate = rate(total.world_accepted, total.world_proposed);
    diag.location_accept_rate = rate(total.location_accepted, total.location_proposed);
    diag.theta_accept_rate = rate(total.theta_accepted, total.theta_proposed);

    result.theta_trajectory.push_back(estimate_V(particles));
    result.inferred.push_back(
        particles[pick_world_estimate(particles, scene, cfg, intr, noise)].world);
    result.diagnostics.push_back(diag);

    parallel_for(m, [&](std::size_t i) {
      Particle& p = particles[i];
      std::vector<DiffResult> diffs;
      diffs.reserve(scene.frames.size());
      for (const auto& frame : scene.frames) {
        diffs.push_back(
            diff_world_detections(p.world, frame, intr, noise.matching_radius_px, c));
      }
      p.beliefs_previous = p.beliefs;
      p.beliefs = update_beliefs(p.beliefs, diffs, static_cast<int>(scene.frames.size()));
    });
  }

  result.theta_final = result.theta_trajectory.back();
  return result;
}

std::vector<WorldState> reinfer(std::span<const SceneData> scenes, const Theta& theta_hat,
                                const FilterConfig& cfg, const CameraIntrinsics& intr,
                                const NoiseModel& noise) {
  cfg.validate();
  intr.validate();
  noise.validate();
  theta_hat.validate();
  if (theta_hat.size() != cfg.scene_prior.num_categories) {
    throw std::invalid_argument("reinfer: theta dimension mismatch");
  }
  if (scenes.empty()) return {};
  const std::size_t c = cfg.scene_prior.num_categories;
  check_scenes(scenes, c);

  const std::size_t m = static_cast<std::size_t>(cfg.num_particles);
  std::vector<Particle> particles(m);
  for (auto& p : particles) {
    p.theta_current = theta_hat;
    p.theta_previous = theta_hat;
    p.beliefs = prior_beliefs(c);
    p.beliefs_previous = prior_beliefs(c);
  }

  std::vector<WorldState> out;
  out.reserve(scenes.size());
  for (std::size_t t = 0; t < scenes.size(); ++t) {
    const SceneData& scene = scenes[t];
    const SceneContext ctx = build_scene_context(scene, cfg, intr, noise);

    parallel_for(m, [&](std::size_t i) {
      Rng rng(derive_seed(cfg.seed, {kPropagateTag, t, i}));
      Particle& p = particles[i];
      p.world = sample_world_prior(cfg.scene_prior, rng);
      p.log_weight += scene_log_likelihood(scene, p.world, theta_hat, intr, noise);
    });

    const WeightSummary ws = summarize_weights(particles);
    if (ws.log_total != kNegInf &&
        ws.ess < cfg.ess_fraction * static_cast<double>(m)) {
      Rng rng(derive_seed(cfg.seed, {kResampleTag, t}));
      const auto idx = systematic_resample(ws.normalized, rng);
      std::vector<Particle> next(m);
      for (std::size_t i = 0; i < m; ++i) next[i] = particles[idx[i]];
      particles = std::move(next);
      const double equal = ws.log_total - std::log(static_cast<double>(m));
      for (auto& p : particles) p.log_weight = equal;
    }

    parallel_for(m, [&](std::size_t i) {
      Rng rng(derive_seed(cfg.seed, {kRejuvenateTag, t, i}));
      particles[i] = rejuvenate_with_context(particles[i], ctx, cfg, rng, true, nullptr);
    });

    out.push_back(particles[pick_world_estimate(particles, scene, cfg, intr, noise)].world);
  }
  return out;
}

}  // namespace metacog
