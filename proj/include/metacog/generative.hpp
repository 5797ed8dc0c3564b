#pragma once

#include <span>
#include <vector>

#include "metacog/geometry.hpp"
#include "metacog/rng.hpp"
#include "metacog/types.hpp"

namespace metacog {

struct RoomBounds {
  double x_min = -6.0, x_max = 6.0;
  double y_min = 0.0, y_max = 1.0;
  double z_min = -4.0, z_max = 4.0;

  void validate() const;
  double volume() const;
  bool contains(const Vec3& p) const;
};

// Prior over world states: geometric object count P(N=n) = p (1-p)^n,
// uniform categories, uniform placement over the room box, pairwise Gaussian
// repulsion between objects.
struct ScenePrior {
  double count_p = 0.9;
  double repulsion_sigma_sq = 1.0;
  RoomBounds bounds;
  std::size_t num_categories = 5;

  void validate() const;
};

// Spatial scatter of detections and the association radius used when scoring.
struct NoiseModel {
  double spatial_sigma_px = 200.0;
  double matching_radius_px = 200.0;

  void validate() const;
};

double world_log_prior(const WorldState& world, const ScenePrior& prior);

WorldState sample_world_prior(const ScenePrior& prior, Rng& rng);

// Forward detector model: per frame and category, Poisson(lambda_c)
// hallucinations placed uniformly over the image, and per visible object a
// geometric number of detections (capped at 20) scattered around the projected
// position with Gaussian noise of noise.spatial_sigma_px per axis.
std::vector<FrameObservation> simulate_detections(const WorldState& world, const Theta& theta,
                                                  std::span<const CameraPose> poses,
                                                  const CameraIntrinsics& intr,
                                                  const NoiseModel& noise, Rng& rng);

// Matching-based likelihood of one frame: Poisson terms on per-category
// hallucination counts, geometric terms on per-visible-object matched counts,
// Gaussian terms on matched displacements, uniform density for hallucinated
// positions. -inf when a zero-rate category is contradicted.
double frame_log_likelihood(const FrameObservation& frame, const WorldState& world,
                            const Theta& theta, const CameraIntrinsics& intr,
                            const NoiseModel& noise);

// Sum of frame log-likelihoods in frame order.
double scene_log_likelihood(const SceneData& scene, const WorldState& world, const Theta& theta,
                            const CameraIntrinsics& intr, const NoiseModel& noise);

// Matched-detection totals per object across all frames of a scene, under the
// same association rule as the likelihood. Drives removal proposals.
std::vector<int> scene_match_counts(const SceneData& scene, const WorldState& world,
                                    const CameraIntrinsics& intr, const NoiseModel& noise);

}  // namespace metacog
