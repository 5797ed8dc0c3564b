#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "metacog/rng.hpp"

namespace metacog {

// Per-category Bernoulli detector parameters of the spatial-free model.
struct LwTheta {
  std::vector<double> halluc_probs;
  std::vector<double> miss_probs;

  std::size_t size() const { return halluc_probs.size(); }
  void validate() const;
};

struct LwWorldState {
  std::vector<std::uint8_t> presence;

  std::size_t size() const { return presence.size(); }
};

struct LwFrame {
  std::vector<std::uint8_t> detected;
};

// Prior over presence vectors: object count from Poisson(1) truncated to
// [1, min(5, |C|)], categories chosen uniformly without replacement.
struct LwWorldPrior {
  std::size_t num_categories = 5;
  double count_mean = 1.0;
  int count_min = 1;
  int count_max = 5;

  void validate() const;
  int effective_count_max() const;
  double log_prob(const LwWorldState& world) const;
  LwWorldState sample(Rng& rng) const;
  // All presence vectors with admissible counts, in ascending bitmask order.
  std::vector<LwWorldState> enumerate() const;
};

struct LwFilterConfig {
  int num_particles = 100;
  int sweeps = 20;
  double mh_sigma = 0.1;  // truncated-normal proposal scale (variance 0.01)
  double ess_fraction = 0.5;
  double prior_alpha = 2.0;
  double prior_beta = 10.0;
  LwWorldPrior world_prior;
  bool exact_enumeration = false;  // lw_reinfer only: exact 2^|C| posterior

  void validate() const;
};

struct LwResult {
  std::vector<LwWorldState> inferred;   // per world
  std::vector<LwTheta> theta_trajectory;  // per world
  LwTheta theta_final;
};

// Per-category Bernoulli log-likelihood of one frame given a presence vector.
double lw_frame_log_likelihood(const LwFrame& frame, const LwWorldState& world,
                               const LwTheta& theta);

// Particle filter over one detector's sequence of world states. Particles
// carry (presence hypothesis, theta); hypotheses are redrawn from the world
// prior at each world boundary and weighted by that world's frames; theta
// persists (identity kernel) and is rejuvenated by truncated-normal
// Metropolis-Hastings sweeps over its elements in randomized order, against
// Beta(prior_alpha, prior_beta) priors and all frames seen so far.
LwResult lw_run_filter(std::span<const std::vector<LwFrame>> worlds_frames,
                       const LwFilterConfig& cfg, Rng& rng);

// Re-infers every world with theta fixed (no learning): the retrospective and
// reference-detector conditions. Runs the same importance-sampling machinery,
// or the exact enumeration posterior when cfg.exact_enumeration is set.
std::vector<LwWorldState> lw_reinfer(std::span<const std::vector<LwFrame>> worlds_frames,
                                     const LwTheta& theta_fixed, const LwFilterConfig& cfg,
                                     Rng& rng);

// Exact posterior over prior.enumerate(), given fixed theta. Normalized;
// uniform over the support if every world has zero posterior mass.
std::vector<double> lw_enumeration_posterior(std::span<const LwFrame> frames,
                                             const LwTheta& theta, const LwWorldPrior& prior);

// Monte Carlo estimate of the same posterior from num_particles prior draws,
// aligned with prior.enumerate(). Diagnostic counterpart for convergence
// checks against the exact version.
std::vector<double> lw_sampled_posterior(std::span<const LwFrame> frames, const LwTheta& theta,
                                         const LwWorldPrior& prior, int num_particles, Rng& rng);

}  // namespace metacog
