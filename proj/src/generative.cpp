#include "metacog/generative.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "match_detail.hpp"

namespace metacog {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kMaxDetectionsPerObject = 20;

const double* log_factorial_table() {
  static const auto table = [] {
    static double t[256];
    t[0] = 0.0;
    for (int i = 1; i < 256; ++i) t[i] = t[i - 1] + std::log(static_cast<double>(i));
    return t;
  }();
  return table;
}

double log_factorial(int n) {
  if (n < 256) return log_factorial_table()[n];
  return std::lgamma(static_cast<double>(n) + 1.0);
}

double log_poisson_pmf(int count, double rate) {
  if (rate == 0.0) return count == 0 ? 0.0 : kNegInf;
  return -rate + count * std::log(rate) - log_factorial(count);
}

// log P(N = n) for the geometric detection-count law P(N=n) = p^n (1-p).
double log_geometric_pmf(int n, double p) {
  if (n == 0) return std::log1p(-p);
  if (p == 0.0) return kNegInf;
  return n * std::log(p) + std::log1p(-p);
}

int sample_geometric_count(double p, Rng& rng) {
  // Inverse CDF of P(N=n) = p (1-p)^n over n >= 0 with success prob (1-p).
  if (p == 0.0) return 0;
  const double u = rng.uniform();
  const double n = std::floor(std::log1p(-u) / std::log(p));
  if (!(n >= 0.0)) return 0;
  return static_cast<int>(std::min(n, 1e9));
}

}  // namespace

void RoomBounds::validate() const {
  if (!(x_min < x_max) || !(y_min < y_max) || !(z_min < z_max)) {
    throw std::invalid_argument("room bounds: each span must be positive");
  }
}

double RoomBounds::volume() const {
  return (x_max - x_min) * (y_max - y_min) * (z_max - z_min);
}

bool RoomBounds::contains(const Vec3& p) const {
  return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max && p.z >= z_min &&
         p.z <= z_max;
}

void ScenePrior::validate() const {
  if (!(count_p > 0.0) || !(count_p < 1.0)) {
    throw std::invalid_argument("scene prior: count parameter must lie in (0, 1)");
  }
  if (!(repulsion_sigma_sq > 0.0)) {
    throw std::invalid_argument("scene prior: repulsion variance must be positive");
  }
  if (num_categories < 1) throw std::invalid_argument("scene prior: need categories");
  bounds.validate();
}

void NoiseModel::validate() const {
  if (!(spatial_sigma_px > 0.0) || !(matching_radius_px > 0.0)) {
    throw std::invalid_argument("noise model: parameters must be positive");
  }
}

double world_log_prior(const WorldState& world, const ScenePrior& prior) {
  prior.validate();
  const std::size_t n = world.objects.size();
  double lp = std::log(prior.count_p) + static_cast<double>(n) * std::log1p(-prior.count_p);
  lp -= static_cast<double>(n) * std::log(static_cast<double>(prior.num_categories));
  const double log_inv_volume = -std::log(prior.bounds.volume());
  for (const auto& obj : world.objects) {
    if (obj.category >= prior.num_categories) {
      throw std::invalid_argument("world prior: object category out of range");
    }
    if (!prior.bounds.contains(obj.position)) return kNegInf;
    lp += log_inv_volume;
  }
  const double inv_two_sigma_sq = 1.0 / (2.0 * prior.repulsion_sigma_sq);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Vec3 d = world.objects[i].position - world.objects[j].position;
      const double repel = -std::expm1(-d.dot(d) * inv_two_sigma_sq);
      if (!(repel > 0.0)) return kNegInf;
      lp += std::log(repel);
    }
  }
  return lp;
}

WorldState sample_world_prior(const ScenePrior& prior, Rng& rng) {
  prior.validate();
  WorldState world;
  int n = 0;
  // P(N=n) = p (1-p)^n: count of failures before success with prob p.
  while (!rng.bernoulli(prior.count_p)) ++n;
  world.objects.reserve(n);
  for (int i = 0; i < n; ++i) {
    Object3D obj;
    obj.category = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(prior.num_categories) - 1));
    obj.position = Vec3{rng.uniform(prior.bounds.x_min, prior.bounds.x_max),
                        rng.uniform(prior.bounds.y_min, prior.bounds.y_max),
                        rng.uniform(prior.bounds.z_min, prior.bounds.z_max)};
    world.objects.push_back(obj);
  }
  return world;
}

std::vector<FrameObservation> simulate_detections(const WorldState& world, const Theta& theta,
                                                  std::span<const CameraPose> poses,
                                                  const CameraIntrinsics& intr,
                                                  const NoiseModel& noise, Rng& rng) {
  theta.validate();
  intr.validate();
  noise.validate();
  const std::size_t c = theta.size();
  for (const auto& obj : world.objects) {
    if (obj.category >= c) throw std::invalid_argument("simulate: object category out of range");
  }
  std::vector<FrameObservation> frames;
  frames.reserve(poses.size());
  for (const auto& pose : poses) {
    FrameObservation frame;
    frame.camera = pose;
    for (std::size_t cat = 0; cat < c; ++cat) {
      const long h = rng.poisson(theta.halluc_rates[cat]);
      for (long i = 0; i < h; ++i) {
        frame.detections.push_back(Detection2D{rng.uniform(0.0, intr.image_width),
                                               rng.uniform(0.0, intr.image_height), cat});
      }
    }
    for (const auto& obj : world.objects) {
      if (!is_visible(obj.position, pose, intr)) continue;
      const auto pix = project(obj.position, pose, intr);
      const int count =
          std::min(sample_geometric_count(theta.det_rates[obj.category], rng),
                   kMaxDetectionsPerObject);
      for (int i = 0; i < count; ++i) {
        frame.detections.push_back(Detection2D{pix->x + rng.normal(0.0, noise.spatial_sigma_px),
                                               pix->y + rng.normal(0.0, noise.spatial_sigma_px),
                                               obj.category});
      }
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

namespace {

struct LikelihoodVisitor {
  double gauss_norm;        // log of the 2D Gaussian normalizer
  double inv_two_sigma_sq;  // of the spatial noise
  std::vector<int>* halluc;
  std::vector<int>* matches;             // per visible slot
  std::vector<std::size_t>* categories;  // per visible slot
  double log_lik = 0.0;

  void on_visible(std::size_t, std::size_t category) {
    matches->push_back(0);
    categories->push_back(category);
  }
  void on_match(std::size_t slot, double dx, double dy) {
    ++(*matches)[slot];
    log_lik += gauss_norm - (dx * dx + dy * dy) * inv_two_sigma_sq;
  }
  void on_hallucination(std::size_t category) { ++halluc->at(category); }
};

}  // namespace

double frame_log_likelihood(const FrameObservation& frame, const WorldState& world,
                            const Theta& theta, const CameraIntrinsics& intr,
                            const NoiseModel& noise) {
  const std::size_t c = theta.size();
  thread_local std::vector<int> halluc;
  thread_local std::vector<int> matches;
  thread_local std::vector<std::size_t> categories;
  halluc.assign(c, 0);
  matches.clear();
  categories.clear();

  const double sigma = noise.spatial_sigma_px;
  LikelihoodVisitor vis{-std::log(2.0 * std::numbers::pi * sigma * sigma),
                        1.0 / (2.0 * sigma * sigma),
                        &halluc,
                        &matches,
                        &categories};
  detail::match_frame(world, frame, intr, noise.matching_radius_px, vis);

  double ll = vis.log_lik;
  int total_halluc = 0;
  for (std::size_t cat = 0; cat < c; ++cat) {
    ll += log_poisson_pmf(halluc[cat], theta.halluc_rates[cat]);
    total_halluc += halluc[cat];
  }
  for (std::size_t slot = 0; slot < matches.size(); ++slot) {
    ll += log_geometric_pmf(matches[slot], theta.det_rates.at(categories[slot]));
  }
  ll -= total_halluc *
        std::log(static_cast<double>(intr.image_width) * static_cast<double>(intr.image_height));
  return ll;
}

double scene_log_likelihood(const SceneData& scene, const WorldState& world, const Theta& theta,
                            const CameraIntrinsics& intr, const NoiseModel& noise) {
  if (scene.frames.empty()) throw std::invalid_argument("scene without frames");
  double ll = 0.0;
  for (const auto& frame : scene.frames) {
    ll += frame_log_likelihood(frame, world, theta, intr, noise);
  }
  return ll;
}

namespace {

struct MatchCountVisitor {
  std::vector<int>* counts;                // per object index
  std::vector<std::size_t>* slot_to_obj;   // visible slot -> object index

  void on_visible(std::size_t object_index, std::size_t) {
    slot_to_obj->push_back(object_index);
  }
  void on_match(std::size_t slot, double, double) { ++(*counts)[(*slot_to_obj)[slot]]; }
  void on_hallucination(std::size_t) {}
};

}  // namespace

std::vector<int> scene_match_counts(const SceneData& scene, const WorldState& world,
                                    const CameraIntrinsics& intr, const NoiseModel& noise) {
  std::vector<int> counts(world.objects.size(), 0);
  std::vector<std::size_t> slot_to_obj;
  for (const auto& frame : scene.frames) {
    slot_to_obj.clear();
    detail::match_frame(world, frame, intr, noise.matching_radius_px,
                        MatchCountVisitor{&counts, &slot_to_obj});
  }
  return counts;
}

}  // namespace metacog
