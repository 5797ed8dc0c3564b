#include "metacog/beliefs.hpp"

#include <stdexcept>

namespace metacog {

void MetaBeliefs::validate() const {
  if (gamma_params.size() != beta_params.size()) {
    throw std::invalid_argument("beliefs: parameter vectors must have equal length");
  }
  if (gamma_params.empty()) throw std::invalid_argument("beliefs: need at least one category");
  for (const auto& g : gamma_params) {
    if (!(g.alpha > 0.0) || !(g.beta > 0.0)) {
      throw std::invalid_argument("beliefs: Gamma parameters must be positive");
    }
  }
  for (const auto& b : beta_params) {
    if (!(b.alpha > 0.0) || !(b.beta > 0.0)) {
      throw std::invalid_argument("beliefs: Beta parameters must be positive");
    }
  }
}

MetaBeliefs prior_beliefs(std::size_t num_categories) {
  if (num_categories < 1) throw std::invalid_argument("beliefs: need at least one category");
  MetaBeliefs b;
  b.gamma_params.assign(num_categories, GammaParams{1.0, 1.0});
  b.beta_params.assign(num_categories, BetaParams{1.0, 1.0});
  return b;
}

MetaBeliefs prior_beliefs(const CategoryTable& categories) {
  categories.validate();
  return prior_beliefs(categories.size());
}

MetaBeliefs update_beliefs(const MetaBeliefs& beliefs, std::span<const DiffResult> diffs,
                           int num_frames) {
  beliefs.validate();
  if (num_frames <= 0) throw std::invalid_argument("update_beliefs: num_frames must be >= 1");
  if (diffs.size() != static_cast<std::size_t>(num_frames)) {
    throw std::invalid_argument("update_beliefs: one diff per frame required");
  }
  MetaBeliefs out = beliefs;
  const std::size_t c = out.size();
  for (const auto& diff : diffs) {
    if (diff.hallucinations.size() != c) {
      throw std::invalid_argument("update_beliefs: diff category count mismatch");
    }
    for (std::size_t i = 0; i < c; ++i) {
      out.gamma_params[i].alpha += diff.hallucinations[i];
    }
    for (const auto& ev : diff.events) {
      out.beta_params[ev.category].alpha += ev.matched_count;
      out.beta_params[ev.category].beta += 1.0;
    }
  }
  for (std::size_t i = 0; i < c; ++i) {
    out.gamma_params[i].beta += num_frames;
  }
  return out;
}

Theta sample_theta(const MetaBeliefs& beliefs, Rng& rng) {
  beliefs.validate();
  Theta theta;
  theta.halluc_rates.reserve(beliefs.size());
  theta.det_rates.reserve(beliefs.size());
  for (const auto& g : beliefs.gamma_params) {
    theta.halluc_rates.push_back(rng.gamma(g.alpha, g.beta));
  }
  for (const auto& b : beliefs.beta_params) {
    theta.det_rates.push_back(rng.beta(b.alpha, b.beta));
  }
  return theta;
}

Theta expected_theta(const MetaBeliefs& beliefs) {
  beliefs.validate();
  Theta theta;
  theta.halluc_rates.reserve(beliefs.size());
  theta.det_rates.reserve(beliefs.size());
  for (const auto& g : beliefs.gamma_params) {
    theta.halluc_rates.push_back(g.alpha / g.beta);
  }
  for (const auto& b : beliefs.beta_params) {
    theta.det_rates.push_back(b.alpha / (b.alpha + b.beta));
  }
  return theta;
}

}  // namespace metacog
