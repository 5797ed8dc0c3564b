#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "metacog/geometry.hpp"
#include "metacog/lightweight.hpp"
#include "metacog/rng.hpp"
#include "metacog/types.hpp"

namespace metacog {

// Axis-aligned 2D box given by centroid and half extents, in pixels.
struct GroundTruthBox {
  double center_x = 0.0;
  double center_y = 0.0;
  double half_width = 0.0;
  double half_height = 0.0;
  std::size_t category = 0;

  void validate() const;  // half extents must be positive
  bool contains(double x, double y) const;  // boundary inclusive
};

struct CurvePoint {
  double x = 0.0;
  double mean_accuracy = 0.0;
  std::size_t sample_count = 0;
};

// Windowed mean-accuracy curve; x strictly increasing.
struct AccuracyCurve {
  std::vector<CurvePoint> points;
};

struct SamplePoint {
  double x = 0.0;
  double accuracy = 0.0;
};

// Mean squared error over both parameter vectors: (1/2|C|) sum of squared
// component differences.
double theta_mse(const LwTheta& a, const LwTheta& b);

// Same metric for the spatial model, comparing hallucination rates directly
// and detection rates through the miss probability (miss = 1 - p, so squared
// differences of p are unchanged).
double theta_mse(const Theta& a, const Theta& b);

// Multiset Jaccard over category ids: sum of per-id min counts over sum of
// per-id max counts. Both empty -> 1.
double jaccard(std::span<const std::size_t> a, std::span<const std::size_t> b);

std::vector<std::size_t> categories_of(const WorldState& world);
std::vector<std::size_t> categories_of(const LwWorldState& world);

// Mean per-bit disagreement between frames and the presence vector.
double faultiness(std::span<const LwFrame> frames, const LwWorldState& world);

// Empirical detector error rates extracted by matching detections against
// the ground-truth world: hallucination rate is per frame, miss rate per
// in-view object event (absent when the category was never in view).
struct GroundTruthTheta {
  std::vector<double> halluc_rates;
  std::vector<std::optional<double>> miss_rates;
};

GroundTruthTheta ground_truth_theta(std::span<const SceneData> scenes,
                                    const CameraIntrinsics& intr, double radius_px,
                                    std::size_t num_categories);

// Per category: exact min-cost matching of inferred points to box centroids
// by Euclidean distance; a pair scores 1 iff the point lies inside its box.
// Frame score = scoring pairs / (pairs + unmatched inferred + unmatched
// truth); both sides empty -> 1.
double frame_accuracy_2d(std::span<const Detection2D> inferred,
                         std::span<const GroundTruthBox> truth);

// Mean of frame scores across a video; frame lists must align.
double video_accuracy_2d(std::span<const std::vector<Detection2D>> inferred,
                         std::span<const std::vector<GroundTruthBox>> truth);

struct Accuracy3D {
  double category_jaccard = 0.0;
  std::optional<double> mean_distance;  // absent when no same-category pairs
};

// Category-multiset Jaccard plus mean Euclidean distance over same-category
// min-cost pairs.
Accuracy3D accuracy_3d(const WorldState& inferred, const WorldState& truth);

// Mean accuracy of samples with |x - grid point| <= half_width, for grid
// points grid_min, grid_min + grid_step, ..., grid_max. Empty windows are
// omitted.
AccuracyCurve rolling_accuracy_curve(std::span<const SamplePoint> points,
                                     double half_width = 0.05, double grid_min = 0.0,
                                     double grid_max = 0.5, double grid_step = 0.01);

// Ordinary least-squares slope of y on x.
double linear_slope(std::span<const double> x, std::span<const double> y);

// Truth boxes for synthetic scenes: every ground-truth object visible in a
// frame becomes a box at its projected centroid with the given half extents.
// Throws when the scene carries no ground truth.
std::vector<std::vector<GroundTruthBox>> synthetic_truth_boxes(const SceneData& scene,
                                                               const CameraIntrinsics& intr,
                                                               double half_extent_px = 100.0);

// Per-frame image points of a world's visible objects, for 2D scoring of an
// inferred world against truth boxes.
std::vector<std::vector<Detection2D>> project_world_points(
    const WorldState& world, std::span<const FrameObservation> frames,
    const CameraIntrinsics& intr);

struct BootstrapCi {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

// Percentile bootstrap confidence interval for the mean of paired
// differences.
BootstrapCi bootstrap_mean_ci(std::span<const double> diffs, int num_resamples, double level,
                              Rng& rng);

}  // namespace metacog
