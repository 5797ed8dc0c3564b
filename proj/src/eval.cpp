#include "metacog/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "metacog/diff.hpp"
#include "metacog/hungarian.hpp"

namespace metacog {

void GroundTruthBox::validate() const {
  if (!(half_width > 0.0) || !(half_height > 0.0)) {
    throw std::invalid_argument("ground truth box: half extents must be positive");
  }
}

bool GroundTruthBox::contains(double x, double y) const {
  return std::abs(x - center_x) <= half_width && std::abs(y - center_y) <= half_height;
}

double theta_mse(const LwTheta& a, const LwTheta& b) {
  if (a.size() != b.size() || a.size() == 0) {
    throw std::invalid_argument("theta mse: dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double dh = a.halluc_probs[i] - b.halluc_probs[i];
    const double dm = a.miss_probs[i] - b.miss_probs[i];
    s += dh * dh + dm * dm;
  }
  return s / (2.0 * static_cast<double>(a.size()));
}

double theta_mse(const Theta& a, const Theta& b) {
  if (a.size() != b.size() || a.size() == 0) {
    throw std::invalid_argument("theta mse: dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double dh = a.halluc_rates[i] - b.halluc_rates[i];
    // miss probability is 1 - detection rate; the difference is the same up
    // to sign, so squared terms agree.
    const double dm = a.det_rates[i] - b.det_rates[i];
    s += dh * dh + dm * dm;
  }
  return s / (2.0 * static_cast<double>(a.size()));
}

double jaccard(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  std::map<std::size_t, std::size_t> ca, cb;
  for (auto x : a) ++ca[x];
  for (auto x : b) ++cb[x];
  std::size_t inter = 0, uni = 0;
  for (const auto& [k, n] : ca) {
    const auto it = cb.find(k);
    const std::size_t m = it == cb.end() ? 0 : it->second;
    inter += std::min(n, m);
    uni += std::max(n, m);
  }
  for (const auto& [k, m] : cb) {
    if (ca.find(k) == ca.end()) uni += m;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<std::size_t> categories_of(const WorldState& world) {
  std::vector<std::size_t> out;
  out.reserve(world.objects.size());
  for (const auto& o : world.objects) out.push_back(o.category);
  return out;
}

std::vector<std::size_t> categories_of(const LwWorldState& world) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < world.presence.size(); ++i) {
    if (world.presence[i]) out.push_back(i);
  }
  return out;
}

double faultiness(std::span<const LwFrame> frames, const LwWorldState& world) {
  if (frames.empty()) throw std::invalid_argument("faultiness: need at least one frame");
  const std::size_t c = world.size();
  std::size_t mismatches = 0;
  for (const auto& f : frames) {
    if (f.detected.size() != c) throw std::invalid_argument("faultiness: dimension mismatch");
    for (std::size_t i = 0; i < c; ++i) {
      if ((f.detected[i] != 0) != (world.presence[i] != 0)) ++mismatches;
    }
  }
  return static_cast<double>(mismatches) /
         (static_cast<double>(frames.size()) * static_cast<double>(c));
}

GroundTruthTheta ground_truth_theta(std::span<const SceneData> scenes,
                                    const CameraIntrinsics& intr, double radius_px,
                                    std::size_t num_categories) {
  if (scenes.empty()) throw std::invalid_argument("ground truth theta: no scenes");
  std::vector<double> halluc(num_categories, 0.0);
  std::vector<double> misses(num_categories, 0.0);
  std::vector<double> in_view(num_categories, 0.0);
  std::size_t total_frames = 0;
  for (const auto& scene : scenes) {
    if (!scene.ground_truth.has_value()) {
      throw std::invalid_argument("ground truth theta: scene lacks ground truth");
    }
    if (scene.frames.empty()) {
      throw std::invalid_argument("ground truth theta: scene with no frames");
    }
    for (const auto& frame : scene.frames) {
      const DiffResult d =
          diff_world_detections(*scene.ground_truth, frame, intr, radius_px, num_categories);
      for (std::size_t c = 0; c < num_categories; ++c) {
        halluc[c] += static_cast<double>(d.hallucinations[c]);
      }
      for (const auto& ev : d.events) {
        in_view[ev.category] += 1.0;
        if (ev.matched_count == 0) misses[ev.category] += 1.0;
      }
      ++total_frames;
    }
  }
  GroundTruthTheta out;
  out.halluc_rates.resize(num_categories);
  out.miss_rates.resize(num_categories);
  for (std::size_t c = 0; c < num_categories; ++c) {
    out.halluc_rates[c] = halluc[c] / static_cast<double>(total_frames);
    if (in_view[c] > 0.0) {
      out.miss_rates[c] = misses[c] / in_view[c];
    }
  }
  return out;
}

double frame_accuracy_2d(std::span<const Detection2D> inferred,
                         std::span<const GroundTruthBox> truth) {
  for (const auto& b : truth) b.validate();
  std::map<std::size_t, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> by_cat;
  for (std::size_t i = 0; i < inferred.size(); ++i) by_cat[inferred[i].category].first.push_back(i);
  for (std::size_t j = 0; j < truth.size(); ++j) by_cat[truth[j].category].second.push_back(j);

  std::size_t pairs = 0, scoring = 0, unmatched = 0;
  for (const auto& [cat, lists] : by_cat) {
    const auto& pts = lists.first;
    const auto& boxes = lists.second;
    const std::size_t n = pts.size(), m = boxes.size();
    if (n == 0 || m == 0) {
      unmatched += n + m;
      continue;
    }
    std::vector<double> cost(n * m);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double dx = inferred[pts[i]].x - truth[boxes[j]].center_x;
        const double dy = inferred[pts[i]].y - truth[boxes[j]].center_y;
        cost[i * m + j] = std::sqrt(dx * dx + dy * dy);
      }
    }
    const auto row_to_col = min_cost_assignment(cost, n, m);
    std::size_t matched = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (row_to_col[i] < 0) continue;
      ++matched;
      const auto& b = truth[boxes[static_cast<std::size_t>(row_to_col[i])]];
      if (b.contains(inferred[pts[i]].x, inferred[pts[i]].y)) ++scoring;
    }
    pairs += matched;
    unmatched += (n - matched) + (m - matched);
  }
  const std::size_t denom = pairs + unmatched;
  if (denom == 0) return 1.0;
  return static_cast<double>(scoring) / static_cast<double>(denom);
}

double video_accuracy_2d(std::span<const std::vector<Detection2D>> inferred,
                         std::span<const std::vector<GroundTruthBox>> truth) {
  if (inferred.size() != truth.size()) {
    throw std::invalid_argument("video accuracy: frame count mismatch");
  }
  if (inferred.empty()) throw std::invalid_argument("video accuracy: no frames");
  double s = 0.0;
  for (std::size_t i = 0; i < inferred.size(); ++i) {
    s += frame_accuracy_2d(inferred[i], truth[i]);
  }
  return s / static_cast<double>(inferred.size());
}

Accuracy3D accuracy_3d(const WorldState& inferred, const WorldState& truth) {
  Accuracy3D out;
  const auto ci = categories_of(inferred);
  const auto ct = categories_of(truth);
  out.category_jaccard = jaccard(ci, ct);

  std::map<std::size_t, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> by_cat;
  for (std::size_t i = 0; i < inferred.objects.size(); ++i) {
    by_cat[inferred.objects[i].category].first.push_back(i);
  }
  for (std::size_t j = 0; j < truth.objects.size(); ++j) {
    by_cat[truth.objects[j].category].second.push_back(j);
  }
  double dist_sum = 0.0;
  std::size_t pairs = 0;
  for (const auto& [cat, lists] : by_cat) {
    const auto& a = lists.first;
    const auto& b = lists.second;
    const std::size_t n = a.size(), m = b.size();
    if (n == 0 || m == 0) continue;
    std::vector<double> cost(n * m);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        cost[i * m + j] = (inferred.objects[a[i]].position - truth.objects[b[j]].position).norm();
      }
    }
    const auto row_to_col = min_cost_assignment(cost, n, m);
    for (std::size_t i = 0; i < n; ++i) {
      if (row_to_col[i] < 0) continue;
      dist_sum += cost[i * m + static_cast<std::size_t>(row_to_col[i])];
      ++pairs;
    }
  }
  if (pairs > 0) out.mean_distance = dist_sum / static_cast<double>(pairs);
  return out;
}

AccuracyCurve rolling_accuracy_curve(std::span<const SamplePoint> points, double half_width,
                                     double grid_min, double grid_max, double grid_step) {
  if (points.empty()) throw std::invalid_argument("accuracy curve: need at least one point");
  if (!(half_width >= 0.0) || !(grid_step > 0.0) || !(grid_min <= grid_max)) {
    throw std::invalid_argument("accuracy curve: bad grid");
  }
  AccuracyCurve curve;
  for (std::size_t i = 0;; ++i) {
    const double x = grid_min + static_cast<double>(i) * grid_step;
    if (x > grid_max + 1e-12) break;
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& p : points) {
      if (std::abs(p.x - x) <= half_width) {
        s += p.accuracy;
        ++n;
      }
    }
    if (n > 0) curve.points.push_back({x, s / static_cast<double>(n), n});
  }
  return curve;
}

double linear_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("linear slope: need >= 2 aligned samples");
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("linear slope: x has zero variance");
  return sxy / sxx;
}

std::vector<std::vector<GroundTruthBox>> synthetic_truth_boxes(const SceneData& scene,
                                                               const CameraIntrinsics& intr,
                                                               double half_extent_px) {
  if (!scene.ground_truth.has_value()) {
    throw std::invalid_argument("truth boxes: scene has no ground truth");
  }
  if (!(half_extent_px > 0.0)) throw std::invalid_argument("truth boxes: bad half extent");
  std::vector<std::vector<GroundTruthBox>> out(scene.frames.size());
  for (std::size_t f = 0; f < scene.frames.size(); ++f) {
    for (const Object3D& obj : scene.ground_truth->objects) {
      if (!is_visible(obj.position, scene.frames[f].camera, intr)) continue;
      const auto px = project(obj.position, scene.frames[f].camera, intr);
      out[f].push_back({px->x, px->y, half_extent_px, half_extent_px, obj.category});
    }
  }
  return out;
}

std::vector<std::vector<Detection2D>> project_world_points(
    const WorldState& world, std::span<const FrameObservation> frames,
    const CameraIntrinsics& intr) {
  std::vector<std::vector<Detection2D>> out(frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    for (const Object3D& obj : world.objects) {
      if (!is_visible(obj.position, frames[f].camera, intr)) continue;
      const auto px = project(obj.position, frames[f].camera, intr);
      out[f].push_back({px->x, px->y, obj.category});
    }
  }
  return out;
}

BootstrapCi bootstrap_mean_ci(std::span<const double> diffs, int num_resamples, double level,
                              Rng& rng) {
  if (diffs.empty()) throw std::invalid_argument("bootstrap: no samples");
  if (num_resamples < 1) throw std::invalid_argument("bootstrap: need resamples");
  if (!(level > 0.0) || !(level < 1.0)) throw std::invalid_argument("bootstrap: bad level");
  const std::size_t n = diffs.size();
  BootstrapCi out;
  for (double d : diffs) out.mean += d;
  out.mean /= static_cast<double>(n);

  std::vector<double> means(static_cast<std::size_t>(num_resamples));
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += diffs[rng.uniform_int(0, static_cast<long long>(n) - 1)];
    }
    m = s / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const double alpha = 1.0 - level;
  const auto quantile_index = [&](double q) {
    const auto idx = static_cast<std::size_t>(q * static_cast<double>(means.size()));
    return std::min(idx, means.size() - 1);
  };
  out.lo = means[quantile_index(alpha / 2.0)];
  out.hi = means[quantile_index(1.0 - alpha / 2.0)];
  return out;
}

}  // namespace metacog
