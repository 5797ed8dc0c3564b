#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "metacog/beliefs.hpp"
#include "metacog/generative.hpp"
#include "metacog/geometry.hpp"
#include "metacog/rng.hpp"
#include "metacog/types.hpp"

namespace metacog {

// One SMC particle: a world hypothesis for the scene being processed, the
// detector-parameter samples for this scene and the previous one, the
// conjugate beliefs they were drawn from, and the accumulated log weight.
struct Particle {
  WorldState world;
  Theta theta_current;
  Theta theta_previous;
  MetaBeliefs beliefs;           // updated through the previous scene
  MetaBeliefs beliefs_previous;  // one scene older (theta_previous's source)
  double log_weight = 0.0;
};

struct FilterConfig {
  int num_particles = 100;
  int rejuvenation_sweeps = 200;
  double location_sigma = 0.01;   // Gaussian location perturbation, per axis
  double line_sigma_sq = 0.01;    // variance of the ray proposal's spread
  double ess_fraction = 0.5;      // resample when ESS drops below this * M
  std::uint64_t seed = 0;
  ScenePrior scene_prior;

  // Per-scene world point estimate: the highest-weight particle's world, or
  // the particle world maximizing likelihood + prior.
  enum class WorldEstimator { kHighestWeight, kPosteriorScore };
  WorldEstimator estimator = WorldEstimator::kHighestWeight;

  void validate() const;
};

struct SceneDiagnostics {
  double ess = 0.0;  // before any resampling
  bool resampled = false;
  double world_accept_rate = 0.0;
  double location_accept_rate = 0.0;
  double theta_accept_rate = 0.0;
};

struct InferenceResult {
  std::vector<WorldState> inferred;      // per scene
  std::vector<Theta> theta_trajectory;   // per scene, weighted particle mean
  Theta theta_final;
  std::vector<SceneDiagnostics> diagnostics;
};

// Probability of proposing an object addition: half the probability that
// hallucinations alone, Poisson(sum of hallucination rates), would produce
// at most the scene's detection count. Near 0.5 when detections outnumber
// what hallucinations explain, near 0 when they do not.
double p_add(const Theta& theta, long total_detections);

// Data-driven category draw: weight_c = max(1, k_c) * p_c / (p_c + 1 -
// exp(-lambda_c)) with k_c the scene's detection count for category c.
// Throws when every weight is zero.
std::size_t propose_category(std::span<const long> category_counts, const Theta& theta, Rng& rng);

// Point near the back-projected ray of a detection: depth uniform over the
// segment of the ray inside the room, plus Gaussian displacement of variance
// line_sigma_sq in the two perpendicular directions. Falls back to uniform
// over the room when the ray misses it.
Vec3 sample_ray_proposal(const Detection2D& det, const CameraPose& pose,
                         const CameraIntrinsics& intr, const RoomBounds& bounds,
                         double line_sigma_sq, Rng& rng);

// Density (log, w.r.t. 3D volume) of sample_ray_proposal at x, including the
// uniform fallback when the ray misses the room.
double ray_proposal_log_density(const Vec3& x, const Detection2D& det, const CameraPose& pose,
                                const CameraIntrinsics& intr, const RoomBounds& bounds,
                                double line_sigma_sq);

// Mixture proposal for new object locations: uniform over the room with
// probability one half, otherwise the ray proposal. Without a detection the
// draw is always uniform.
Vec3 propose_location(const std::optional<Detection2D>& detection, const CameraPose& pose,
                      const CameraIntrinsics& intr, const RoomBounds& bounds,
                      double line_sigma_sq, Rng& rng);

struct MoveStats {
  long world_proposed = 0;
  long world_accepted = 0;
  long location_proposed = 0;
  long location_accepted = 0;
  long theta_proposed = 0;
  long theta_accepted = 0;
};

// One rejuvenation pass: cfg.rejuvenation_sweeps iterations of (world edit,
// location move, theta redraw), each a Metropolis-Hastings step with full
// proposal-density corrections, targeting likelihood * prior at fixed data.
// fix_theta skips the theta step (re-inference mode).
Particle rejuvenate(const Particle& particle, const SceneData& scene, const FilterConfig& cfg,
                    const CameraIntrinsics& intr, const NoiseModel& noise, Rng& rng,
                    bool fix_theta = false, MoveStats* stats = nullptr);

// Weight-normalized mean of particle thetas. Throws when every weight is
// -inf.
Theta estimate_V(std::span<const Particle> particles);

// Sequential filter over scenes: propagate (fresh world from the scene
// prior, theta from beliefs), weight, resample on low ESS, rejuvenate, then
// update each particle's beliefs from its own world-vs-detections diff.
InferenceResult run_filter(std::span<const SceneData> scenes, const FilterConfig& cfg,
                           const CameraIntrinsics& intr, const NoiseModel& noise);

// World inference with theta pinned to theta_hat: no theta moves, no belief
// updates. Used for the final outputs and for the fixed-prior baseline.
std::vector<WorldState> reinfer(std::span<const SceneData> scenes, const Theta& theta_hat,
                                const FilterConfig& cfg, const CameraIntrinsics& intr,
                                const NoiseModel& noise);

}  // namespace metacog
