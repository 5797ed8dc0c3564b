// Command-line front end: dataset synthesis, benchmark runs, external-data
// ingestion, and metric exports. All randomness flows from --seed through
// per-item derived generators, so outputs are byte-identical for any value
// of METACOG_THREADS.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "metacog/beliefs.hpp"
#include "metacog/eval.hpp"
#include "metacog/inference.hpp"
#include "metacog/io.hpp"
#include "metacog/lightweight.hpp"
#include "metacog/parallel.hpp"
#include "metacog/rng.hpp"
#include "metacog/simulator.hpp"

namespace {

using namespace metacog;
using nlohmann::json;
namespace fs = std::filesystem;

// Command-level seed-path tags; the engine's internal phases use their own.
constexpr std::uint64_t kRunLwTag = 0x4C;
constexpr std::uint64_t kTrainTag = 0x3F;
constexpr std::uint64_t kReinferTag = 0x3E;
constexpr std::uint64_t kBootstrapTag = 0xB5;

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

std::string item_file_name(const char* prefix, std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%05zu.jsonl", prefix, index);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

const json& cfg_at(const json& config, const char* key) {
  const auto it = config.find(key);
  if (it == config.end()) {
    throw DataError(std::string("manifest config: missing key '") + key + "'");
  }
  return *it;
}

json theta_to_json(const Theta& t) {
  return json{{"halluc", t.halluc_rates}, {"det", t.det_rates}};
}

Theta theta_from_json(const json& j, const char* what) {
  try {
    Theta t;
    t.halluc_rates = j.at("halluc").get<std::vector<double>>();
    t.det_rates = j.at("det").get<std::vector<double>>();
    t.validate();
    return t;
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(std::string(what) + ": bad detector parameters: " + e.what());
  }
}

json world_to_json(const WorldState& w) {
  json objs = json::array();
  for (const auto& o : w.objects) {
    objs.push_back(json::array({o.position.x, o.position.y, o.position.z, o.category}));
  }
  return objs;
}

WorldState world_from_json(const json& j, const char* what) {
  WorldState w;
  if (!j.is_array()) throw DataError(std::string(what) + ": world must be an array");
  for (const auto& oj : j) {
    if (!oj.is_array() || oj.size() != 4) {
      throw DataError(std::string(what) + ": object must be [x, y, z, category]");
    }
    w.objects.push_back(
        {{oj[0].get<double>(), oj[1].get<double>(), oj[2].get<double>()}, oj[3].get<std::size_t>()});
  }
  return w;
}

json intrinsics_to_json(const CameraIntrinsics& it) {
  return json{{"image_width", it.image_width},
              {"image_height", it.image_height},
              {"vertical_fov_deg", it.vertical_fov_deg}};
}

CameraIntrinsics intrinsics_from_json(const json& j) {
  CameraIntrinsics it;
  it.image_width = cfg_at(j, "image_width").get<int>();
  it.image_height = cfg_at(j, "image_height").get<int>();
  it.vertical_fov_deg = cfg_at(j, "vertical_fov_deg").get<double>();
  it.validate();
  return it;
}

json noise_to_json(const NoiseModel& n) {
  return json{{"spatial_sigma_px", n.spatial_sigma_px},
              {"matching_radius_px", n.matching_radius_px}};
}

NoiseModel noise_from_json(const json& j) {
  NoiseModel n;
  n.spatial_sigma_px = cfg_at(j, "spatial_sigma_px").get<double>();
  n.matching_radius_px = cfg_at(j, "matching_radius_px").get<double>();
  n.validate();
  return n;
}

json bounds_to_json(const RoomBounds& b) {
  return json{{"x_min", b.x_min}, {"x_max", b.x_max}, {"y_min", b.y_min},
              {"y_max", b.y_max}, {"z_min", b.z_min}, {"z_max", b.z_max}};
}

RoomBounds bounds_from_json(const json& j) {
  RoomBounds b;
  b.x_min = cfg_at(j, "x_min").get<double>();
  b.x_max = cfg_at(j, "x_max").get<double>();
  b.y_min = cfg_at(j, "y_min").get<double>();
  b.y_max = cfg_at(j, "y_max").get<double>();
  b.z_min = cfg_at(j, "z_min").get<double>();
  b.z_max = cfg_at(j, "z_max").get<double>();
  b.validate();
  return b;
}

std::vector<std::string> stamp_comments(const FileStamp& stamp) {
  return {"seed=" + std::to_string(stamp.seed), "config_hash=" + stamp.config_hash};
}

void write_results_json(const fs::path& path, const char* kind, const FileStamp& stamp,
                        const json& config, json body) {
  body["format_version"] = kFormatVersion;
  body["kind"] = kind;
  body["seed"] = stamp.seed;
  body["config_hash"] = stamp.config_hash;
  body["config"] = config;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << body.dump(2) << '\n';
  if (!out.good()) throw DataError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// gen-lw

struct GenLwArgs {
  std::uint64_t seed = 0;
  std::string out;
  int detectors = 1000;
  int worlds = 75;
  std::string scale = "desk";
};

int cmd_gen_lw(const GenLwArgs& a) {
  Timer timer;
  LwDatasetConfig cfg;
  cfg.num_detectors = a.detectors;
  cfg.num_worlds = a.worlds;
  cfg.validate();
  const CategoryTable categories = CategoryTable::standard();

  const json config{{"command", "gen-lw"},
                    {"detectors", cfg.num_detectors},
                    {"worlds", cfg.num_worlds},
                    {"min_frames", cfg.min_frames},
                    {"max_frames", cfg.max_frames},
                    {"beta_alpha", cfg.beta_alpha},
                    {"beta_beta", cfg.beta_beta},
                    {"world_prior",
                     {{"num_categories", cfg.world_prior.num_categories},
                      {"count_mean", cfg.world_prior.count_mean},
                      {"count_min", cfg.world_prior.count_min},
                      {"count_max", cfg.world_prior.count_max}}}};
  const FileStamp stamp{a.seed, config_hash(config)};

  fs::create_directories(a.out);
  Manifest manifest;
  manifest.seed = a.seed;
  manifest.config_hash = stamp.config_hash;
  manifest.kind = "lw_dataset";
  manifest.categories = categories;
  manifest.config = config;
  manifest.files.resize(static_cast<std::size_t>(cfg.num_detectors));
  for (std::size_t d = 0; d < manifest.files.size(); ++d) {
    manifest.files[d] = item_file_name("detector", d);
  }
  parallel_for(manifest.files.size(), [&](std::size_t d) {
    const LwDetectorData det = synthesize_lw_detector(cfg, a.seed, d);
    write_lw_detector_file(fs::path(a.out) / manifest.files[d], det, stamp, categories);
  });
  write_manifest(fs::path(a.out) / "manifest.json", manifest);
  std::cerr << "gen-lw: " << manifest.files.size() << " detector files in " << timer.seconds()
            << "s\n";
  return 0;
}

// ---------------------------------------------------------------------------
// run-lw

struct RunLwArgs {
  std::string dataset;
  std::string out;
  std::uint64_t seed = 0;
  int particles = 100;
  int sweeps = 20;
  int detectors = 0;  // 0: every detector in the dataset
};

struct LwOutcome {
  std::vector<double> zeta;  // per world
  std::vector<double> mse;   // learned-theta error after each world
  std::vector<double> acc_learn, acc_mc, acc_les;
  double prior_ref_mse = 0.0;
};

int cmd_run_lw(const RunLwArgs& a) {
  Timer timer;
  const fs::path dataset_dir(a.dataset);
  const Manifest manifest = read_manifest(dataset_dir / "manifest.json");
  if (manifest.kind != "lw_dataset") {
    throw DataError("run-lw: expected an lw_dataset manifest, found kind '" + manifest.kind + "'");
  }
  const std::size_t num_categories = manifest.categories.size();
  std::size_t num_detectors = manifest.files.size();
  if (a.detectors > 0) {
    num_detectors = std::min(num_detectors, static_cast<std::size_t>(a.detectors));
  }
  if (num_detectors == 0) throw DataError("run-lw: dataset lists no detector files");

  LwFilterConfig cfg;
  cfg.num_particles = a.particles;
  cfg.sweeps = a.sweeps;
  cfg.world_prior.num_categories = num_categories;
  cfg.validate();

  // Reference detector parameters: prior mean for every element.
  const double prior_mean = cfg.prior_alpha / (cfg.prior_alpha + cfg.prior_beta);
  LwTheta lesioned;
  lesioned.halluc_probs.assign(num_categories, prior_mean);
  lesioned.miss_probs.assign(num_categories, prior_mean);

  std::vector<LwOutcome> outcomes(num_detectors);
  parallel_for(num_detectors, [&](std::size_t d) {
    const LwDetectorData data = read_lw_detector_file(dataset_dir / manifest.files[d]);
    if (data.theta_true.size() != num_categories) {
      throw DataError(manifest.files[d] + ": detector width does not match the manifest");
    }
    Rng rng_learn(derive_seed(a.seed, {kRunLwTag, d, 0}));
    Rng rng_mc(derive_seed(a.seed, {kRunLwTag, d, 1}));
    Rng rng_les(derive_seed(a.seed, {kRunLwTag, d, 2}));
    const LwResult res = lw_run_filter(data.frames, cfg, rng_learn);
    const auto mc_worlds = lw_reinfer(data.frames, res.theta_final, cfg, rng_mc);
    const auto les_worlds = lw_reinfer(data.frames, lesioned, cfg, rng_les);

    LwOutcome& o = outcomes[d];
    const std::size_t w_count = data.worlds.size();
    o.zeta.resize(w_count);
    o.mse.resize(w_count);
    o.acc_learn.resize(w_count);
    o.acc_mc.resize(w_count);
    o.acc_les.resize(w_count);
    for (std::size_t w = 0; w < w_count; ++w) {
      o.zeta[w] = faultiness(data.frames[w], data.worlds[w]);
      o.mse[w] = theta_mse(res.theta_trajectory[w], data.theta_true);
      const auto truth_cats = categories_of(data.worlds[w]);
      o.acc_learn[w] = jaccard(categories_of(res.inferred[w]), truth_cats);
      o.acc_mc[w] = jaccard(categories_of(mc_worlds[w]), truth_cats);
      o.acc_les[w] = jaccard(categories_of(les_worlds[w]), truth_cats);
    }
    o.prior_ref_mse = theta_mse(lesioned, data.theta_true);
  });

  const std::size_t w_count = outcomes.front().zeta.size();
  for (const auto& o : outcomes) {
    if (o.zeta.size() != w_count) {
      throw DataError("run-lw: detectors disagree on world count");
    }
  }

  const json config{{"command", "run-lw"},
                    {"particles", cfg.num_particles},
                    {"sweeps", cfg.sweeps},
                    {"detectors_used", num_detectors},
                    {"prior_alpha", cfg.prior_alpha},
                    {"prior_beta", cfg.prior_beta},
                    {"dataset_config_hash", manifest.config_hash}};
  const FileStamp stamp{a.seed, config_hash(config)};
  fs::create_directories(a.out);
  const auto comments = stamp_comments(stamp);

  // Parameter-recovery curve plus the frozen-prior reference line.
  double prior_ref = 0.0;
  for (const auto& o : outcomes) prior_ref += o.prior_ref_mse;
  prior_ref /= static_cast<double>(num_detectors);
  {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t w = 0; w < w_count; ++w) {
      double m = 0.0;
      for (const auto& o : outcomes) m += o.mse[w];
      m /= static_cast<double>(num_detectors);
      rows.push_back({std::to_string(w + 1), format_double(m), format_double(prior_ref)});
    }
    const std::vector<std::string> cols{"world_index", "mean_theta_mse", "prior_reference_mse"};
    write_csv(fs::path(a.out) / "fig4a.csv", comments, cols, rows);
  }

  // Accuracy by world index, one column per variant.
  std::vector<double> curve_learn(w_count, 0.0), curve_mc(w_count, 0.0), curve_les(w_count, 0.0);
  for (const auto& o : outcomes) {
    for (std::size_t w = 0; w < w_count; ++w) {
      curve_learn[w] += o.acc_learn[w];
      curve_mc[w] += o.acc_mc[w];
      curve_les[w] += o.acc_les[w];
    }
  }
  for (std::size_t w = 0; w < w_count; ++w) {
    curve_learn[w] /= static_cast<double>(num_detectors);
    curve_mc[w] /= static_cast<double>(num_detectors);
    curve_les[w] /= static_cast<double>(num_detectors);
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t w = 0; w < w_count; ++w) {
      rows.push_back({std::to_string(w + 1), format_double(curve_learn[w]),
                      format_double(curve_mc[w]), format_double(curve_les[w])});
    }
    const std::vector<std::string> cols{"world_index", "accuracy_learning", "accuracy_metacog",
                                        "accuracy_lesioned"};
    write_csv(fs::path(a.out) / "fig4b.csv", comments, cols, rows);
  }

  // Accuracy against faultiness: rolling windows over per-(detector, world)
  // samples; every variant shares the same sample locations.
  std::vector<SamplePoint> s_learn, s_mc, s_les;
  s_learn.reserve(num_detectors * w_count);
  s_mc.reserve(num_detectors * w_count);
  s_les.reserve(num_detectors * w_count);
  for (const auto& o : outcomes) {
    for (std::size_t w = 0; w < w_count; ++w) {
      s_learn.push_back({o.zeta[w], o.acc_learn[w]});
      s_mc.push_back({o.zeta[w], o.acc_mc[w]});
      s_les.push_back({o.zeta[w], o.acc_les[w]});
    }
  }
  const AccuracyCurve c_learn = rolling_accuracy_curve(s_learn);
  const AccuracyCurve c_mc = rolling_accuracy_curve(s_mc);
  const AccuracyCurve c_les = rolling_accuracy_curve(s_les);
  if (c_learn.points.size() != c_mc.points.size() || c_mc.points.size() != c_les.points.size()) {
    throw std::runtime_error("run-lw: variant curves fell out of alignment");
  }
  double max_diff = -1.0, max_diff_zeta = 0.0;
  double crossover = c_mc.points.empty() ? 0.0 : c_mc.points.front().x;
  {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < c_mc.points.size(); ++i) {
      const double diff = c_mc.points[i].mean_accuracy - c_les.points[i].mean_accuracy;
      if (diff > max_diff) {
        max_diff = diff;
        max_diff_zeta = c_mc.points[i].x;
      }
      rows.push_back({format_double(c_mc.points[i].x),
                      format_double(c_learn.points[i].mean_accuracy),
                      format_double(c_mc.points[i].mean_accuracy),
                      format_double(c_les.points[i].mean_accuracy), format_double(diff),
                      std::to_string(c_mc.points[i].sample_count)});
    }
    for (std::size_t i = c_mc.points.size(); i-- > 0;) {
      const double diff = c_mc.points[i].mean_accuracy - c_les.points[i].mean_accuracy;
      if (diff <= 0.0) break;
      crossover = c_mc.points[i].x;
    }
    const std::vector<std::string> cols{"faultiness",        "accuracy_learning",
                                        "accuracy_metacog",  "accuracy_lesioned",
                                        "accuracy_diff",     "window_samples"};
    write_csv(fs::path(a.out) / "fig4cd.csv", comments, cols, rows);
  }

  // Per-detector summaries; the id joins rows back to the dataset files.
  std::vector<double> det_zeta(num_detectors), det_mse(num_detectors);
  {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t d = 0; d < num_detectors; ++d) {
      const LwOutcome& o = outcomes[d];
      det_zeta[d] = mean_of(o.zeta);
      det_mse[d] = o.mse.back();
      rows.push_back({std::to_string(d), format_double(det_zeta[d]), format_double(det_mse[d]),
                      format_double(mean_of(o.acc_learn)), format_double(mean_of(o.acc_mc)),
                      format_double(mean_of(o.acc_les))});
    }
    const std::vector<std::string> cols{"detector",          "mean_faultiness",
                                        "final_theta_mse",   "accuracy_learning",
                                        "accuracy_metacog",  "accuracy_lesioned"};
    write_csv(fs::path(a.out) / "per_detector.csv", comments, cols, rows);
  }

  double final_mean_mse = 0.0, mean_learn = 0.0, mean_mc = 0.0, mean_les = 0.0;
  for (std::size_t d = 0; d < num_detectors; ++d) {
    final_mean_mse += det_mse[d];
    mean_learn += mean_of(outcomes[d].acc_learn);
    mean_mc += mean_of(outcomes[d].acc_mc);
    mean_les += mean_of(outcomes[d].acc_les);
  }
  final_mean_mse /= static_cast<double>(num_detectors);
  mean_learn /= static_cast<double>(num_detectors);
  mean_mc /= static_cast<double>(num_detectors);
  mean_les /= static_cast<double>(num_detectors);
  const double slope = num_detectors >= 2 ? linear_slope(det_zeta, det_mse) : 0.0;

  json body{{"summary",
             {{"final_mean_theta_mse", final_mean_mse},
              {"prior_reference_mse", prior_ref},
              {"mean_accuracy_learning", mean_learn},
              {"mean_accuracy_metacog", mean_mc},
              {"mean_accuracy_lesioned", mean_les},
              {"learning_curve_first", curve_learn.front()},
              {"learning_curve_last", curve_learn.back()},
              {"mse_on_faultiness_slope", slope},
              {"max_accuracy_diff", max_diff},
              {"max_accuracy_diff_at", max_diff_zeta},
              {"sustained_advantage_from", crossover}}}};
  write_results_json(fs::path(a.out) / "results.json", "results_lw", stamp, config,
                     std::move(body));
  std::cerr << "run-lw: " << num_detectors << " detectors in " << timer.seconds() << "s\n";
  return 0;
}

// ---------------------------------------------------------------------------
// gen-3d

struct Gen3dArgs {
  std::uint64_t seed = 0;
  std::string out;
  int scenes = 100;
  int frames = 20;
};

int cmd_gen_3d(const Gen3dArgs& a) {
  Timer timer;
  Dataset3DConfig cfg;
  cfg.scene.trajectory.num_frames = a.frames;
  cfg.validate();
  if (a.scenes < 1) throw ConfigError("gen-3d: need at least one scene");
  const Theta theta_true = default_true_theta();
  const CategoryTable categories = CategoryTable::standard();

  const TrajectoryParams& tp = cfg.scene.trajectory;
  const json config{
      {"command", "gen-3d"},
      {"scenes", a.scenes},
      {"scene",
       {{"bounds", bounds_to_json(cfg.scene.bounds)},
        {"placement_margin", cfg.scene.placement_margin},
        {"min_objects", cfg.scene.min_objects},
        {"max_objects", cfg.scene.max_objects},
        {"num_categories", cfg.scene.num_categories},
        {"trajectory",
         {{"num_frames", tp.num_frames},
          {"path_sigma", tp.path_kernel.sigma},
          {"path_lengthscale", tp.path_kernel.lengthscale},
          {"focal_sigma", tp.focal_kernel.sigma},
          {"focal_lengthscale", tp.focal_kernel.lengthscale},
          {"camera_height", tp.camera_height},
          {"room_x_span", tp.room_x_span},
          {"room_z_span", tp.room_z_span},
          {"focal_mean", json::array({tp.focal_mean.x, tp.focal_mean.y, tp.focal_mean.z})}}}}},
      {"intrinsics", intrinsics_to_json(cfg.intrinsics)},
      {"noise", noise_to_json(cfg.noise)},
      {"theta_true", theta_to_json(theta_true)}};
  const FileStamp stamp{a.seed, config_hash(config)};

  fs::create_directories(a.out);
  Manifest manifest;
  manifest.seed = a.seed;
  manifest.config_hash = stamp.config_hash;
  manifest.kind = "dataset_3d";
  manifest.categories = categories;
  manifest.config = config;
  manifest.files.resize(static_cast<std::size_t>(a.scenes));
  for (std::size_t s = 0; s < manifest.files.size(); ++s) {
    manifest.files[s] = item_file_name("scene", s);
  }
  parallel_for(manifest.files.size(), [&](std::size_t s) {
    SceneFile file;
    file.scene = synthesize_3d_scene_data(cfg, theta_true, a.seed, s);
    file.categories = categories;
    write_scene_file(fs::path(a.out) / manifest.files[s], file, stamp);
  });
  write_manifest(fs::path(a.out) / "manifest.json", manifest);
  std::cerr << "gen-3d: " << manifest.files.size() << " scene files in " << timer.seconds()
            << "s\n";
  return 0;
}

// ---------------------------------------------------------------------------
// run-3d / eval shared scoring

struct TestScores {
  std::vector<double> acc2d_mc, acc2d_les, acc2d_det;
  std::vector<Accuracy3D> a3_mc, a3_les;
};

TestScores score_test_scenes(std::span<const SceneData> test, std::span<const WorldState> mc,
                             std::span<const WorldState> les, const CameraIntrinsics& intr,
                             double half_extent) {
  if (mc.size() != test.size() || les.size() != test.size()) {
    throw DataError("evaluation: inferred worlds misaligned with test scenes");
  }
  TestScores s;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (!test[i].ground_truth.has_value()) {
      throw DataError("evaluation: test scene " + std::to_string(i) + " has no ground truth");
    }
    const auto boxes = synthetic_truth_boxes(test[i], intr, half_extent);
    std::vector<std::vector<Detection2D>> raw(test[i].frames.size());
    for (std::size_t f = 0; f < test[i].frames.size(); ++f) {
      raw[f] = test[i].frames[f].detections;
    }
    s.acc2d_det.push_back(video_accuracy_2d(raw, boxes));
    s.acc2d_mc.push_back(
        video_accuracy_2d(project_world_points(mc[i], test[i].frames, intr), boxes));
    s.acc2d_les.push_back(
        video_accuracy_2d(project_world_points(les[i], test[i].frames, intr), boxes));
    s.a3_mc.push_back(accuracy_3d(mc[i], *test[i].ground_truth));
    s.a3_les.push_back(accuracy_3d(les[i], *test[i].ground_truth));
  }
  return s;
}

// Writes the three metric CSVs and returns the same numbers as JSON.
json write_score_tables(const fs::path& dir, const char* prefix,
                        const std::vector<std::string>& comments,
                        const std::vector<TestScores>& per_order, std::uint64_t boot_seed) {
  std::vector<double> det, les, mc;          // pooled 2D accuracy
  std::vector<double> jac_les, jac_mc;       // pooled 3D category overlap
  std::vector<double> dist_les, dist_mc;     // pooled 3D mean distances
  for (const auto& s : per_order) {
    det.insert(det.end(), s.acc2d_det.begin(), s.acc2d_det.end());
    les.insert(les.end(), s.acc2d_les.begin(), s.acc2d_les.end());
    mc.insert(mc.end(), s.acc2d_mc.begin(), s.acc2d_mc.end());
    for (const auto& a : s.a3_les) {
      jac_les.push_back(a.category_jaccard);
      if (a.mean_distance) dist_les.push_back(*a.mean_distance);
    }
    for (const auto& a : s.a3_mc) {
      jac_mc.push_back(a.category_jaccard);
      if (a.mean_distance) dist_mc.push_back(*a.mean_distance);
    }
  }

  {
    const std::vector<std::string> cols{"variant", "mean_accuracy_2d", "sample_count"};
    std::vector<std::vector<std::string>> rows{
        {"detections", format_double(mean_of(det)), std::to_string(det.size())},
        {"lesioned", format_double(mean_of(les)), std::to_string(les.size())},
        {"metacog", format_double(mean_of(mc)), std::to_string(mc.size())}};
    write_csv(dir / (std::string(prefix) + "table1.csv"), comments, cols, rows);
  }
  {
    const std::vector<std::string> cols{"variant", "mean_jaccard_3d", "mean_distance",
                                        "distance_samples"};
    std::vector<std::vector<std::string>> rows{
        {"lesioned", format_double(mean_of(jac_les)), format_double(mean_of(dist_les)),
         std::to_string(dist_les.size())},
        {"metacog", format_double(mean_of(jac_mc)), format_double(mean_of(dist_mc)),
         std::to_string(dist_mc.size())}};
    write_csv(dir / (std::string(prefix) + "tables23.csv"), comments, cols, rows);
  }
  {
    const std::vector<std::string> cols{
        "order",          "scene",           "accuracy2d_detections", "accuracy2d_lesioned",
        "accuracy2d_metacog", "jaccard3d_lesioned", "jaccard3d_metacog"};
    std::vector<std::vector<std::string>> rows;
    for (std::size_t o = 0; o < per_order.size(); ++o) {
      const TestScores& s = per_order[o];
      for (std::size_t i = 0; i < s.acc2d_det.size(); ++i) {
        rows.push_back({std::to_string(o), std::to_string(i), format_double(s.acc2d_det[i]),
                        format_double(s.acc2d_les[i]), format_double(s.acc2d_mc[i]),
                        format_double(s.a3_les[i].category_jaccard),
                        format_double(s.a3_mc[i].category_jaccard)});
      }
    }
    write_csv(dir / (std::string(prefix) + "paired.csv"), comments, cols, rows);
  }

  json tables{{"accuracy_2d",
               {{"detections", mean_of(det)}, {"lesioned", mean_of(les)}, {"metacog", mean_of(mc)}}},
              {"accuracy_3d",
               {{"lesioned", {{"jaccard", mean_of(jac_les)}, {"distance", mean_of(dist_les)}}},
                {"metacog", {{"jaccard", mean_of(jac_mc)}, {"distance", mean_of(dist_mc)}}}}}};
  if (mc.size() >= 2) {
    std::vector<double> d_det(mc.size()), d_les(mc.size());
    for (std::size_t i = 0; i < mc.size(); ++i) {
      d_det[i] = mc[i] - det[i];
      d_les[i] = mc[i] - les[i];
    }
    Rng rng(derive_seed(boot_seed, {kBootstrapTag}));
    const BootstrapCi ci_det = bootstrap_mean_ci(d_det, 10000, 0.95, rng);
    const BootstrapCi ci_les = bootstrap_mean_ci(d_les, 10000, 0.95, rng);
    tables["bootstrap_2d"] = {
        {"metacog_minus_detections",
         {{"mean", ci_det.mean}, {"lo", ci_det.lo}, {"hi", ci_det.hi}}},
        {"metacog_minus_lesioned", {{"mean", ci_les.mean}, {"lo", ci_les.lo}, {"hi", ci_les.hi}}}};
  }
  return tables;
}

// ---------------------------------------------------------------------------
// run-3d

struct Run3dArgs {
  std::string dataset;
  std::string out;
  std::uint64_t seed = 0;
  int particles = 100;
  int sweeps = 200;
  int orders = 1;
  int train = 0;  // 0: half of the scenes
  double half_extent = 100.0;
};

std::vector<std::vector<std::size_t>> counterbalanced_orders(std::size_t t, int k) {
  std::vector<std::vector<std::size_t>> orders;
  std::vector<std::size_t> fwd(t);
  std::iota(fwd.begin(), fwd.end(), std::size_t{0});
  orders.push_back(fwd);
  if (k >= 2) {
    orders.emplace_back(fwd.rbegin(), fwd.rend());
  }
  const std::size_t mid = t / 2;
  if (k >= 3) {
    std::vector<std::size_t> o;
    for (std::size_t i = mid; i < t; ++i) o.push_back(i);
    for (std::size_t i = 0; i < mid; ++i) o.push_back(i);
    orders.push_back(std::move(o));
  }
  if (k >= 4) {
    std::vector<std::size_t> o;
    for (std::size_t i = mid; i-- > 0;) o.push_back(i);
    for (std::size_t i = mid; i < t; ++i) o.push_back(i);
    orders.push_back(std::move(o));
  }
  return orders;
}

int cmd_run_3d(const Run3dArgs& a) {
  Timer timer;
  const fs::path dataset_dir(a.dataset);
  const Manifest manifest = read_manifest(dataset_dir / "manifest.json");
  if (manifest.kind != "dataset_3d") {
    throw DataError("run-3d: expected a dataset_3d manifest, found kind '" + manifest.kind + "'");
  }
  const CameraIntrinsics intr = intrinsics_from_json(cfg_at(manifest.config, "intrinsics"));
  const NoiseModel noise = noise_from_json(cfg_at(manifest.config, "noise"));
  const Theta theta_true = theta_from_json(cfg_at(manifest.config, "theta_true"), "manifest");
  const RoomBounds bounds =
      bounds_from_json(cfg_at(cfg_at(manifest.config, "scene"), "bounds"));
  const std::size_t num_categories = manifest.categories.size();
  if (theta_true.size() != num_categories) {
    throw DataError("run-3d: manifest theta_true width does not match categories");
  }
  if (manifest.files.empty()) throw DataError("run-3d: dataset lists no scene files");

  std::vector<SceneData> scenes(manifest.files.size());
  parallel_for(scenes.size(), [&](std::size_t s) {
    SceneFile file = read_scene_file(dataset_dir / manifest.files[s]);
    if (file.categories.names != manifest.categories.names) {
      throw DataError(manifest.files[s] + ": category table does not match the manifest");
    }
    scenes[s] = std::move(file.scene);
  });

  const std::size_t num_scenes = scenes.size();
  const std::size_t train_count =
      a.train > 0 ? static_cast<std::size_t>(a.train) : num_scenes / 2;
  if (train_count < 1 || train_count > num_scenes) {
    throw ConfigError("run-3d: train count out of range");
  }
  if (a.orders < 1 || a.orders > 4) throw ConfigError("run-3d: orders must lie in 1..4");
  if (!(a.half_extent > 0.0)) throw ConfigError("run-3d: box half extent must be positive");

  FilterConfig base;
  base.num_particles = a.particles;
  base.rejuvenation_sweeps = a.sweeps;
  base.scene_prior.bounds = bounds;
  base.scene_prior.num_categories = num_categories;
  base.validate();

  const Theta lesion_theta = expected_theta(prior_beliefs(num_categories));
  const double prior_ref_mse = theta_mse(lesion_theta, theta_true);
  const auto order_ids = counterbalanced_orders(train_count, a.orders);
  const std::span<const SceneData> test(scenes.data() + train_count,
                                        num_scenes - train_count);

  struct OrderOutcome {
    Theta theta_final;
    std::vector<double> mse_curve;
    std::vector<WorldState> mc_worlds, les_worlds;
  };
  std::vector<OrderOutcome> outs(order_ids.size());
  std::vector<TestScores> per_order(order_ids.size());
  for (std::size_t o = 0; o < order_ids.size(); ++o) {
    OrderOutcome& oo = outs[o];
    std::vector<SceneData> train;
    train.reserve(train_count);
    for (auto id : order_ids[o]) train.push_back(scenes[id]);
    FilterConfig fc = base;
    fc.seed = derive_seed(a.seed, {kTrainTag, o});
    const InferenceResult res = run_filter(train, fc, intr, noise);
    oo.theta_final = res.theta_final;
    oo.mse_curve.reserve(res.theta_trajectory.size());
    for (const auto& th : res.theta_trajectory) oo.mse_curve.push_back(theta_mse(th, theta_true));
    if (!test.empty()) {
      FilterConfig fm = base;
      fm.seed = derive_seed(a.seed, {kReinferTag, o, 0});
      oo.mc_worlds = reinfer(test, oo.theta_final, fm, intr, noise);
      FilterConfig fl = base;
      fl.seed = derive_seed(a.seed, {kReinferTag, o, 1});
      oo.les_worlds = reinfer(test, lesion_theta, fl, intr, noise);
      per_order[o] = score_test_scenes(test, oo.mc_worlds, oo.les_worlds, intr, a.half_extent);
    }
    std::cerr << "run-3d: order " << o << " finished at " << timer.seconds() << "s\n";
  }

  const json config{{"command", "run-3d"},
                    {"particles", a.particles},
                    {"sweeps", a.sweeps},
                    {"orders", a.orders},
                    {"train_count", train_count},
                    {"box_half_extent_px", a.half_extent},
                    {"dataset_config_hash", manifest.config_hash}};
  const FileStamp stamp{a.seed, config_hash(config)};
  fs::create_directories(a.out);
  auto comments = stamp_comments(stamp);
  if (a.sweeps == 0) comments.push_back("degenerate: sweeps=0 (no rejuvenation)");

  {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < train_count; ++i) {
      double m = 0.0;
      for (const auto& oo : outs) m += oo.mse_curve[i];
      m /= static_cast<double>(outs.size());
      rows.push_back({std::to_string(i + 1), format_double(m), format_double(prior_ref_mse)});
    }
    const std::vector<std::string> cols{"scene_count", "mean_theta_mse", "prior_reference_mse"};
    write_csv(fs::path(a.out) / "fig2b.csv", comments, cols, rows);
  }

  json body;
  if (!test.empty()) {
    body = json{{"tables",
                 write_score_tables(fs::path(a.out), "", comments, per_order, a.seed)}};
  } else {
    body = json{{"tables", nullptr}};
  }
  body["prior_reference_mse"] = prior_ref_mse;
  body["theta_true"] = theta_to_json(theta_true);
  body["train_count"] = train_count;
  json test_ids = json::array();
  for (std::size_t s = train_count; s < num_scenes; ++s) test_ids.push_back(s);
  body["test_scene_ids"] = test_ids;
  json orders_json = json::array();
  for (std::size_t o = 0; o < order_ids.size(); ++o) {
    json worlds_mc = json::array(), worlds_les = json::array();
    for (const auto& w : outs[o].mc_worlds) worlds_mc.push_back(world_to_json(w));
    for (const auto& w : outs[o].les_worlds) worlds_les.push_back(world_to_json(w));
    orders_json.push_back(json{{"order", order_ids[o]},
                               {"theta_final", theta_to_json(outs[o].theta_final)},
                               {"mse_curve", outs[o].mse_curve},
                               {"test_worlds_metacog", worlds_mc},
                               {"test_worlds_lesioned", worlds_les}});
  }
  body["orders"] = orders_json;
  write_results_json(fs::path(a.out) / "results.json", "results_3d", stamp, config,
                     std::move(body));
  std::cerr << "run-3d: done in " << timer.seconds() << "s\n";
  return 0;
}

// ---------------------------------------------------------------------------
// ingest

struct IngestArgs {
  std::string detections;
  std::string poses;
  std::string out;
};

int cmd_ingest(const IngestArgs& a) {
  const SceneFile file = ingest_scene(a.detections, a.poses);
  const json config{{"command", "ingest"}};
  write_scene_file(a.out, file, FileStamp{0, config_hash(config)});
  std::cerr << "ingest: " << file.scene.frames.size() << " frames, "
            << file.categories.size() << " categories\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string dataset;
  std::string results;
  std::string out;
};

int cmd_eval(const EvalArgs& a) {
  Timer timer;
  const fs::path dataset_dir(a.dataset);
  const Manifest manifest = read_manifest(dataset_dir / "manifest.json");
  if (manifest.kind != "dataset_3d") {
    throw DataError("eval: expected a dataset_3d manifest, found kind '" + manifest.kind + "'");
  }
  const CameraIntrinsics intr = intrinsics_from_json(cfg_at(manifest.config, "intrinsics"));

  std::ifstream in(a.results, std::ios::binary);
  if (!in) throw DataError("cannot open for reading: " + a.results);
  json results;
  try {
    results = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(a.results + ": invalid results file: " + e.what());
  }
  if (results.value("kind", "") != std::string("results_3d")) {
    throw DataError(a.results + ": expected kind 'results_3d'");
  }
  const auto seed = cfg_at(results, "seed").get<std::uint64_t>();
  const double half_extent =
      cfg_at(cfg_at(results, "config"), "box_half_extent_px").get<double>();
  const auto test_ids = cfg_at(results, "test_scene_ids").get<std::vector<std::size_t>>();
  if (test_ids.empty()) throw DataError("eval: results carry no test scenes");

  std::vector<SceneData> test(test_ids.size());
  parallel_for(test.size(), [&](std::size_t i) {
    if (test_ids[i] >= manifest.files.size()) {
      throw DataError("eval: test scene id " + std::to_string(test_ids[i]) +
                      " is outside the dataset");
    }
    test[i] = read_scene_file(dataset_dir / manifest.files[test_ids[i]]).scene;
  });

  std::vector<TestScores> per_order;
  for (const auto& oj : cfg_at(results, "orders")) {
    std::vector<WorldState> mc, les;
    for (const auto& wj : cfg_at(oj, "test_worlds_metacog")) {
      mc.push_back(world_from_json(wj, "results"));
    }
    for (const auto& wj : cfg_at(oj, "test_worlds_lesioned")) {
      les.push_back(world_from_json(wj, "results"));
    }
    per_order.push_back(score_test_scenes(test, mc, les, intr, half_extent));
  }
  if (per_order.empty()) throw DataError("eval: results carry no orders");

  fs::create_directories(a.out);
  const FileStamp stamp{seed, results.value("config_hash", "")};
  const auto comments = stamp_comments(stamp);
  const json tables = write_score_tables(fs::path(a.out), "eval_", comments, per_order, seed);
  write_results_json(fs::path(a.out) / "eval_results.json", "eval_3d", stamp,
                     cfg_at(results, "config"), json{{"tables", tables}});
  std::cerr << "eval: " << per_order.size() << " orders x " << test.size() << " scenes in "
            << timer.seconds() << "s\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metacog: joint inference of detector error rates and 3D world states"};
  app.require_subcommand(1);

  GenLwArgs gen_lw_args;
  auto* gen_lw = app.add_subcommand("gen-lw", "Synthesize a detector benchmark dataset");
  gen_lw->add_option("--seed", gen_lw_args.seed, "Master seed");
  gen_lw->add_option("--out", gen_lw_args.out, "Output directory")->required();
  auto* gen_lw_detectors =
      gen_lw->add_option("--detectors", gen_lw_args.detectors, "Number of detectors")
          ->check(CLI::PositiveNumber);
  gen_lw->add_option("--worlds", gen_lw_args.worlds, "World states per detector")
      ->check(CLI::PositiveNumber);
  gen_lw->add_option("--scale", gen_lw_args.scale, "desk (1000 detectors) or full (40000)")
      ->check(CLI::IsMember({"desk", "full"}));

  RunLwArgs run_lw_args;
  auto* run_lw = app.add_subcommand("run-lw", "Run the detector benchmark");
  run_lw->add_option("--dataset", run_lw_args.dataset, "Dataset directory")->required();
  run_lw->add_option("--out", run_lw_args.out, "Output directory")->required();
  run_lw->add_option("--seed", run_lw_args.seed, "Inference seed");
  run_lw->add_option("--particles", run_lw_args.particles, "Particles per filter")
      ->check(CLI::PositiveNumber);
  run_lw->add_option("--sweeps", run_lw_args.sweeps, "Rejuvenation sweeps per world")
      ->check(CLI::NonNegativeNumber);
  run_lw->add_option("--detectors", run_lw_args.detectors, "Use only the first N detectors")
      ->check(CLI::PositiveNumber);

  Gen3dArgs gen_3d_args;
  auto* gen_3d = app.add_subcommand("gen-3d", "Synthesize a multi-view 3D dataset");
  gen_3d->add_option("--seed", gen_3d_args.seed, "Master seed");
  gen_3d->add_option("--out", gen_3d_args.out, "Output directory")->required();
  gen_3d->add_option("--scenes", gen_3d_args.scenes, "Number of scenes")
      ->check(CLI::PositiveNumber);
  gen_3d->add_option("--frames", gen_3d_args.frames, "Frames per scene")
      ->check(CLI::PositiveNumber);

  Run3dArgs run_3d_args;
  auto* run_3d = app.add_subcommand("run-3d", "Train on scenes, evaluate on held-out scenes");
  run_3d->add_option("--dataset", run_3d_args.dataset, "Dataset directory")->required();
  run_3d->add_option("--out", run_3d_args.out, "Output directory")->required();
  run_3d->add_option("--seed", run_3d_args.seed, "Inference seed");
  run_3d->add_option("--particles", run_3d_args.particles, "Particles per filter")
      ->check(CLI::PositiveNumber);
  run_3d->add_option("--sweeps", run_3d_args.sweeps, "Rejuvenation sweeps per scene")
      ->check(CLI::NonNegativeNumber);
  run_3d->add_option("--orders", run_3d_args.orders, "Counterbalanced scene orders (1..4)")
      ->check(CLI::Range(1, 4));
  run_3d->add_option("--train", run_3d_args.train, "Training scenes (default: half)")
      ->check(CLI::PositiveNumber);
  run_3d->add_option("--half-extent", run_3d_args.half_extent,
                     "Ground-truth box half extent in pixels");

  IngestArgs ingest_args;
  auto* ingest = app.add_subcommand("ingest", "Convert external detections and poses");
  ingest->add_option("--detections", ingest_args.detections, "Labeled-box records")->required();
  ingest->add_option("--poses", ingest_args.poses, "Camera-pose records")->required();
  ingest->add_option("--out", ingest_args.out, "Output scene file")->required();

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Recompute metric tables from stored results");
  eval_cmd->add_option("--dataset", eval_args.dataset, "Dataset directory")->required();
  eval_cmd->add_option("--results", eval_args.results, "results.json from run-3d")->required();
  eval_cmd->add_option("--out", eval_args.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(gen_lw)) {
      if (gen_lw_args.scale == "full" && gen_lw_detectors->count() == 0) {
        gen_lw_args.detectors = 40000;
      }
      return cmd_gen_lw(gen_lw_args);
    }
    if (app.got_subcommand(run_lw)) return cmd_run_lw(run_lw_args);
    if (app.got_subcommand(gen_3d)) return cmd_gen_3d(gen_3d_args);
    if (app.got_subcommand(run_3d)) return cmd_run_3d(run_3d_args);
    if (app.got_subcommand(ingest)) return cmd_ingest(ingest_args);
    if (app.got_subcommand(eval_cmd)) return cmd_eval(eval_args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
