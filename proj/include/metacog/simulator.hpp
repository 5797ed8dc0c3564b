#pragma once

#include <cstdint>
#include <vector>

#include "metacog/generative.hpp"
#include "metacog/geometry.hpp"
#include "metacog/lightweight.hpp"
#include "metacog/rng.hpp"
#include "metacog/trajectory.hpp"
#include "metacog/types.hpp"

namespace metacog {

// One synthetic detector: per-category hallucination/miss probabilities,
// each an independent Beta(alpha, beta) draw.
LwTheta sample_lw_detector(Rng& rng, std::size_t num_categories = 5, double alpha = 2.0,
                           double beta = 10.0);

// Presence vector from the standard world prior (truncated-Poisson count,
// distinct uniform categories).
LwWorldState sample_lw_world(Rng& rng);

// Per-category Bernoulli frames: detected with probability 1-M_c when the
// category is present, H_c when absent.
std::vector<LwFrame> simulate_lw_frames(Rng& rng, const LwWorldState& world, const LwTheta& theta,
                                        int num_frames);

struct LwDatasetConfig {
  int num_detectors = 1000;
  int num_worlds = 75;
  int min_frames = 5;
  int max_frames = 15;
  double beta_alpha = 2.0;
  double beta_beta = 10.0;
  LwWorldPrior world_prior;

  void validate() const;
};

struct LwDetectorData {
  LwTheta theta_true;
  std::vector<LwWorldState> worlds;
  std::vector<std::vector<LwFrame>> frames;  // aligned with worlds
};

struct LwDataset {
  std::uint64_t seed = 0;
  std::vector<LwDetectorData> detectors;
};

// Detector `index` of the benchmark, alone; the dataset call below is the
// parallel map of this over all indices.
LwDetectorData synthesize_lw_detector(const LwDatasetConfig& cfg, std::uint64_t seed,
                                      std::size_t index);

// Full synthetic benchmark: detectors are generated in parallel from seeds
// derived per index, so results are identical for any worker count.
LwDataset synthesize_lw_dataset(const LwDatasetConfig& cfg, std::uint64_t seed);

struct Scene3DConfig {
  RoomBounds bounds;           // full room; objects keep a margin from walls
  double placement_margin = 1.0;
  int min_objects = 1;
  int max_objects = 3;
  std::size_t num_categories = 5;
  TrajectoryParams trajectory;
  int max_placement_attempts = 10000;

  void validate() const;
};

struct Scene3D {
  WorldState world;
  std::vector<CameraPose> trajectory;
};

// Objects placed uniformly at random, rejecting layouts that put any pair
// (or any object and a wall) closer than the margin; camera poses from the
// smooth trajectory model. Throws when placement keeps failing.
Scene3D synthesize_3d_scene(const Scene3DConfig& cfg, Rng& rng);

struct Dataset3DConfig {
  Scene3DConfig scene;
  CameraIntrinsics intrinsics;
  NoiseModel noise{20.0, 200.0};  // generation jitter is tight vs model scale

  void validate() const;
};

// Standard synthetic detector parameters: a spread of hallucination rates
// and detection rates across the five categories, including one noisy and
// one under-confident category so a fixed-belief baseline pays a real cost.
Theta default_true_theta();

// Scene `index` of the 3D dataset, alone.
SceneData synthesize_3d_scene_data(const Dataset3DConfig& cfg, const Theta& theta_true,
                                   std::uint64_t seed, std::size_t index);

// Scenes plus simulated detections under theta_true; ground truth retained
// for evaluation. Parallel across scenes with per-scene derived seeds.
std::vector<SceneData> synthesize_3d_dataset(const Dataset3DConfig& cfg, int num_scenes,
                                             const Theta& theta_true, std::uint64_t seed);

}  // namespace metacog
