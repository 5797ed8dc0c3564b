#include "metacog/simulator.hpp"

#include <cmath>
#include <stdexcept>

#include "metacog/parallel.hpp"

namespace metacog {

namespace {

constexpr std::uint64_t kLwDetectorTag = 0xD7;
constexpr std::uint64_t kSceneTag = 0x3D;

}  // namespace

LwTheta sample_lw_detector(Rng& rng, std::size_t num_categories, double alpha, double beta) {
  if (num_categories == 0) throw std::invalid_argument("detector sample: need categories");
  LwTheta t;
  t.halluc_probs.reserve(num_categories);
  t.miss_probs.reserve(num_categories);
  for (std::size_t c = 0; c < num_categories; ++c) t.halluc_probs.push_back(rng.beta(alpha, beta));
  for (std::size_t c = 0; c < num_categories; ++c) t.miss_probs.push_back(rng.beta(alpha, beta));
  return t;
}

LwWorldState sample_lw_world(Rng& rng) {
  return LwWorldPrior{}.sample(rng);
}

std::vector<LwFrame> simulate_lw_frames(Rng& rng, const LwWorldState& world, const LwTheta& theta,
                                        int num_frames) {
  theta.validate();
  if (world.size() != theta.size()) {
    throw std::invalid_argument("frame simulation: dimension mismatch");
  }
  if (num_frames < 0) throw std::invalid_argument("frame simulation: negative frame count");
  std::vector<LwFrame> frames;
  frames.reserve(static_cast<std::size_t>(num_frames));
  for (int f = 0; f < num_frames; ++f) {
    LwFrame fr;
    fr.detected.resize(world.size());
    for (std::size_t c = 0; c < world.size(); ++c) {
      const double p_detect =
          world.presence[c] ? 1.0 - theta.miss_probs[c] : theta.halluc_probs[c];
      fr.detected[c] = rng.bernoulli(p_detect) ? 1 : 0;
    }
    frames.push_back(std::move(fr));
  }
  return frames;
}

void LwDatasetConfig::validate() const {
  if (num_detectors < 1) throw std::invalid_argument("lw dataset: need detectors");
  if (num_worlds < 1) throw std::invalid_argument("lw dataset: need worlds");
  if (min_frames < 1 || min_frames > max_frames) {
    throw std::invalid_argument("lw dataset: bad frame-count range");
  }
  if (!(beta_alpha > 0.0) || !(beta_beta > 0.0)) {
    throw std::invalid_argument("lw dataset: Beta parameters must be positive");
  }
  world_prior.validate();
}

LwDetectorData synthesize_lw_detector(const LwDatasetConfig& cfg, std::uint64_t seed,
                                      std::size_t index) {
  Rng rng(derive_seed(seed, {kLwDetectorTag, index}));
  LwDetectorData det;
  det.theta_true =
      sample_lw_detector(rng, cfg.world_prior.num_categories, cfg.beta_alpha, cfg.beta_beta);
  det.worlds.reserve(static_cast<std::size_t>(cfg.num_worlds));
  det.frames.reserve(static_cast<std::size_t>(cfg.num_worlds));
  for (int w = 0; w < cfg.num_worlds; ++w) {
    det.worlds.push_back(cfg.world_prior.sample(rng));
    const int nf = static_cast<int>(rng.uniform_int(cfg.min_frames, cfg.max_frames));
    det.frames.push_back(simulate_lw_frames(rng, det.worlds.back(), det.theta_true, nf));
  }
  return det;
}

LwDataset synthesize_lw_dataset(const LwDatasetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  LwDataset ds;
  ds.seed = seed;
  ds.detectors.resize(static_cast<std::size_t>(cfg.num_detectors));
  parallel_for(ds.detectors.size(),
               [&](std::size_t d) { ds.detectors[d] = synthesize_lw_detector(cfg, seed, d); });
  return ds;
}

void Scene3DConfig::validate() const {
  bounds.validate();
  if (!(placement_margin >= 0.0)) throw std::invalid_argument("scene: negative margin");
  if (min_objects < 1 || min_objects > max_objects) {
    throw std::invalid_argument("scene: bad object-count range");
  }
  if (num_categories < 1) throw std::invalid_argument("scene: need categories");
  if (max_placement_attempts < 1) throw std::invalid_argument("scene: need attempts");
  if (bounds.x_max - bounds.x_min <= 2.0 * placement_margin ||
      bounds.z_max - bounds.z_min <= 2.0 * placement_margin) {
    throw std::invalid_argument("scene: margin leaves no placement area");
  }
  trajectory.validate();
}

Scene3D synthesize_3d_scene(const Scene3DConfig& cfg, Rng& rng) {
  cfg.validate();
  Scene3D scene;
  const int n = static_cast<int>(rng.uniform_int(cfg.min_objects, cfg.max_objects));
  // Objects stay a margin away from the vertical walls; height is free.
  const double x_lo = cfg.bounds.x_min + cfg.placement_margin;
  const double x_hi = cfg.bounds.x_max - cfg.placement_margin;
  const double z_lo = cfg.bounds.z_min + cfg.placement_margin;
  const double z_hi = cfg.bounds.z_max - cfg.placement_margin;
  int attempts = 0;
  for (int i = 0; i < n; ++i) {
    for (;;) {
      if (++attempts > cfg.max_placement_attempts) {
        throw std::runtime_error("scene placement: attempt budget exhausted (overcrowded)");
      }
      Vec3 pos{rng.uniform(x_lo, x_hi), rng.uniform(cfg.bounds.y_min, cfg.bounds.y_max),
               rng.uniform(z_lo, z_hi)};
      bool ok = true;
      for (const auto& placed : scene.world.objects) {
        if ((placed.position - pos).norm() < cfg.placement_margin) {
          ok = false;
          break;
        }
      }
      if (ok) {
        const auto cat = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(cfg.num_categories) - 1));
        scene.world.objects.push_back({pos, cat});
        break;
      }
    }
  }
  scene.trajectory = sample_trajectory(cfg.trajectory, rng);
  return scene;
}

void Dataset3DConfig::validate() const {
  scene.validate();
  intrinsics.validate();
  noise.validate();
}

Theta default_true_theta() {
  Theta t;
  t.halluc_rates = {0.20, 1.20, 0.05, 0.35, 0.65};
  t.det_rates = {0.85, 0.70, 0.80, 0.25, 0.55};
  return t;
}

std::vector<SceneData> synthesize_3d_dataset(const Dataset3DConfig& cfg, int num_scenes,
                                             const Theta& theta_true, std::uint64_t seed) {
  cfg.validate();
  theta_true.validate();
  if (theta_true.size() != cfg.scene.num_categories) {
    throw std::invalid_argument("3d dataset: theta dimension mismatch");
  }
  if (num_scenes < 1) throw std::invalid_argument("3d dataset: need scenes");
  std::vector<SceneData> out(static_cast<std::size_t>(num_scenes));
  parallel_for(out.size(),
               [&](std::size_t s) { out[s] = synthesize_3d_scene_data(cfg, theta_true, seed, s); });
  return out;
}

SceneData synthesize_3d_scene_data(const Dataset3DConfig& cfg, const Theta& theta_true,
                                   std::uint64_t seed, std::size_t index) {
  Rng rng(derive_seed(seed, {kSceneTag, index}));
  const Scene3D scene = synthesize_3d_scene(cfg.scene, rng);
  SceneData data;
  data.frames =
      simulate_detections(scene.world, theta_true, scene.trajectory, cfg.intrinsics, cfg.noise, rng);
  data.ground_truth = scene.world;
  return data;
}

}  // namespace metacog
