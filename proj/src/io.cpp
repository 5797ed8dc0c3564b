#include "metacog/io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace metacog {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string where(const fs::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

json parse_json_line(const std::string& line, const fs::path& path, std::size_t lineno) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(where(path, lineno) + ": invalid JSON record: " + e.what());
  }
}

// Strict field access with file/line context in the error.
const json& require_field(const json& j, const char* key, const fs::path& path,
                          std::size_t lineno) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw DataError(where(path, lineno) + ": missing field '" + key + "'");
  }
  return *it;
}

void check_header(const json& h, const char* kind, const fs::path& path) {
  const int version = require_field(h, "format_version", path, 1).get<int>();
  if (version != kFormatVersion) {
    throw DataError(path.string() + ": unsupported format_version " + std::to_string(version));
  }
  const std::string k = require_field(h, "kind", path, 1).get<std::string>();
  if (k != kind) {
    throw DataError(path.string() + ": expected kind '" + std::string(kind) + "', found '" + k +
                    "'");
  }
}

std::ofstream open_for_write(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_for_read(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open for reading: " + path.string());
  return in;
}

json vec3_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec3_from_json(const json& j, const fs::path& path, std::size_t lineno) {
  if (!j.is_array() || j.size() != 3) {
    throw DataError(where(path, lineno) + ": expected a 3-element coordinate array");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::vector<std::uint8_t> bits_from_json(const json& j, const fs::path& path,
                                         std::size_t lineno) {
  if (!j.is_array()) throw DataError(where(path, lineno) + ": expected a bit array");
  std::vector<std::uint8_t> out;
  out.reserve(j.size());
  for (const auto& b : j) {
    const int v = b.get<int>();
    if (v != 0 && v != 1) throw DataError(where(path, lineno) + ": bits must be 0 or 1");
    out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

json bits_to_json(const std::vector<std::uint8_t>& bits) {
  json a = json::array();
  for (auto b : bits) a.push_back(static_cast<int>(b));
  return a;
}

CategoryTable categories_from_json(const json& j, const fs::path& path) {
  CategoryTable table;
  if (!j.is_array()) throw DataError(path.string() + ": 'categories' must be an array");
  for (const auto& name : j) table.names.push_back(name.get<std::string>());
  try {
    table.validate();
  } catch (const std::exception& e) {
    throw DataError(path.string() + ": bad category table: " + std::string(e.what()));
  }
  return table;
}

}  // namespace

std::string config_hash(const json& config) {
  const std::string s = config.dump();
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  static const char* hex = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = hex[h & 0xF];
    h >>= 4;
  }
  buf[16] = '\0';
  return std::string(buf);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_lw_detector_file(const fs::path& path, const LwDetectorData& detector,
                            const FileStamp& stamp, const CategoryTable& categories) {
  if (detector.worlds.size() != detector.frames.size()) {
    throw DataError("detector data: worlds and frame lists misaligned");
  }
  auto out = open_for_write(path);
  json header{{"format_version", kFormatVersion},
              {"kind", "lw_detector"},
              {"seed", stamp.seed},
              {"config_hash", stamp.config_hash},
              {"categories", categories.names},
              {"theta_true",
               {{"halluc", detector.theta_true.halluc_probs},
                {"miss", detector.theta_true.miss_probs}}}};
  out << header.dump() << '\n';
  for (std::size_t w = 0; w < detector.worlds.size(); ++w) {
    json frames = json::array();
    for (const auto& f : detector.frames[w]) frames.push_back(bits_to_json(f.detected));
    json rec{{"world", bits_to_json(detector.worlds[w].presence)}, {"frames", frames}};
    out << rec.dump() << '\n';
  }
  if (!out.good()) throw DataError("write failed: " + path.string());
}

LwDetectorData read_lw_detector_file(const fs::path& path) {
  auto in = open_for_read(path);
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  ++lineno;
  const json header = parse_json_line(line, path, lineno);
  check_header(header, "lw_detector", path);
  const json& theta = require_field(header, "theta_true", path, lineno);
  LwDetectorData det;
  det.theta_true.halluc_probs =
      require_field(theta, "halluc", path, lineno).get<std::vector<double>>();
  det.theta_true.miss_probs =
      require_field(theta, "miss", path, lineno).get<std::vector<double>>();
  try {
    det.theta_true.validate();
  } catch (const std::exception& e) {
    throw DataError(where(path, lineno) + ": bad theta_true: " + std::string(e.what()));
  }
  const std::size_t c = det.theta_true.size();
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json rec = parse_json_line(line, path, lineno);
    LwWorldState world;
    world.presence = bits_from_json(require_field(rec, "world", path, lineno), path, lineno);
    if (world.presence.size() != c) {
      throw DataError(where(path, lineno) + ": world width does not match categories");
    }
    std::vector<LwFrame> frames;
    for (const auto& fj : require_field(rec, "frames", path, lineno)) {
      LwFrame f;
      f.detected = bits_from_json(fj, path, lineno);
      if (f.detected.size() != c) {
        throw DataError(where(path, lineno) + ": frame width does not match categories");
      }
      frames.push_back(std::move(f));
    }
    det.worlds.push_back(std::move(world));
    det.frames.push_back(std::move(frames));
  }
  if (det.worlds.empty()) throw DataError(path.string() + ": no world records");
  return det;
}

void write_scene_file(const fs::path& path, const SceneFile& file, const FileStamp& stamp) {
  if (!file.truth_boxes.empty() && file.truth_boxes.size() != file.scene.frames.size()) {
    throw DataError("scene file: truth boxes misaligned with frames");
  }
  auto out = open_for_write(path);
  json header{{"format_version", kFormatVersion},
              {"kind", "scene_3d"},
              {"seed", stamp.seed},
              {"config_hash", stamp.config_hash},
              {"categories", file.categories.names}};
  out << header.dump() << '\n';
  for (std::size_t i = 0; i < file.scene.frames.size(); ++i) {
    const FrameObservation& frame = file.scene.frames[i];
    json dets = json::array();
    for (const auto& d : frame.detections) {
      dets.push_back(json::array({d.x, d.y, d.category}));
    }
    json rec{{"frame",
              {{"camera",
                {{"pos", vec3_to_json(frame.camera.position)},
                 {"focal", vec3_to_json(frame.camera.focal_point)}}},
               {"detections", dets}}}};
    if (!file.truth_boxes.empty()) {
      json boxes = json::array();
      for (const auto& b : file.truth_boxes[i]) {
        boxes.push_back(
            json::array({b.center_x, b.center_y, b.half_width, b.half_height, b.category}));
      }
      rec["truth_boxes"] = boxes;
    }
    out << rec.dump() << '\n';
  }
  if (file.scene.ground_truth.has_value()) {
    json objs = json::array();
    for (const auto& o : file.scene.ground_truth->objects) {
      objs.push_back(json::array({o.position.x, o.position.y, o.position.z, o.category}));
    }
    json rec{{"ground_truth", {{"objects", objs}}}};
    out << rec.dump() << '\n';
  }
  if (!out.good()) throw DataError("write failed: " + path.string());
}

SceneFile read_scene_file(const fs::path& path) {
  auto in = open_for_read(path);
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  ++lineno;
  const json header = parse_json_line(line, path, lineno);
  check_header(header, "scene_3d", path);
  SceneFile file;
  file.categories = categories_from_json(require_field(header, "categories", path, lineno), path);
  const std::size_t c = file.categories.size();
  bool any_boxes = false;
  std::vector<std::vector<GroundTruthBox>> boxes;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json rec = parse_json_line(line, path, lineno);
    if (rec.contains("frame")) {
      const json& fj = rec["frame"];
      FrameObservation frame;
      const json& cam = require_field(fj, "camera", path, lineno);
      frame.camera.position =
          vec3_from_json(require_field(cam, "pos", path, lineno), path, lineno);
      frame.camera.focal_point =
          vec3_from_json(require_field(cam, "focal", path, lineno), path, lineno);
      for (const auto& dj : require_field(fj, "detections", path, lineno)) {
        if (!dj.is_array() || dj.size() != 3) {
          throw DataError(where(path, lineno) + ": detection must be [x, y, category]");
        }
        Detection2D d{dj[0].get<double>(), dj[1].get<double>(), dj[2].get<std::size_t>()};
        if (d.category >= c) {
          throw DataError(where(path, lineno) + ": detection category out of range");
        }
        frame.detections.push_back(d);
      }
      file.scene.frames.push_back(std::move(frame));
      std::vector<GroundTruthBox> frame_boxes;
      if (rec.contains("truth_boxes")) {
        any_boxes = true;
        for (const auto& bj : rec["truth_boxes"]) {
          if (!bj.is_array() || bj.size() != 5) {
            throw DataError(where(path, lineno) +
                            ": truth box must be [cx, cy, half_w, half_h, category]");
          }
          GroundTruthBox b;
          b.center_x = bj[0].get<double>();
          b.center_y = bj[1].get<double>();
          b.half_width = bj[2].get<double>();
          b.half_height = bj[3].get<double>();
          b.category = bj[4].get<std::size_t>();
          if (b.category >= c) {
            throw DataError(where(path, lineno) + ": truth box category out of range");
          }
          frame_boxes.push_back(b);
        }
      }
      boxes.push_back(std::move(frame_boxes));
    } else if (rec.contains("ground_truth")) {
      WorldState world;
      for (const auto& oj : require_field(rec["ground_truth"], "objects", path, lineno)) {
        if (!oj.is_array() || oj.size() != 4) {
          throw DataError(where(path, lineno) + ": object must be [x, y, z, category]");
        }
        Object3D o;
        o.position = {oj[0].get<double>(), oj[1].get<double>(), oj[2].get<double>()};
        o.category = oj[3].get<std::size_t>();
        if (o.category >= c) {
          throw DataError(where(path, lineno) + ": object category out of range");
        }
        world.objects.push_back(o);
      }
      file.scene.ground_truth = std::move(world);
    } else {
      throw DataError(where(path, lineno) + ": unknown record type");
    }
  }
  if (file.scene.frames.empty()) throw DataError(path.string() + ": no frame records");
  if (any_boxes) file.truth_boxes = std::move(boxes);
  return file;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  json j{{"format_version", kFormatVersion}, {"kind", manifest.kind},
         {"seed", manifest.seed},           {"config_hash", manifest.config_hash},
         {"categories", manifest.categories.names}, {"config", manifest.config},
         {"files", manifest.files}};
  auto out = open_for_write(path);
  out << j.dump(2) << '\n';
  if (!out.good()) throw DataError("write failed: " + path.string());
}

Manifest read_manifest(const fs::path& path) {
  auto in = open_for_read(path);
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": invalid manifest: " + e.what());
  }
  const int version = require_field(j, "format_version", path, 1).get<int>();
  if (version != kFormatVersion) {
    throw DataError(path.string() + ": unsupported format_version " + std::to_string(version));
  }
  Manifest m;
  m.kind = require_field(j, "kind", path, 1).get<std::string>();
  m.seed = require_field(j, "seed", path, 1).get<std::uint64_t>();
  m.config_hash = require_field(j, "config_hash", path, 1).get<std::string>();
  m.categories = categories_from_json(require_field(j, "categories", path, 1), path);
  m.config = require_field(j, "config", path, 1);
  m.files = require_field(j, "files", path, 1).get<std::vector<std::string>>();
  return m;
}

void write_csv(const fs::path& path, std::span<const std::string> comments,
               std::span<const std::string> columns,
               const std::vector<std::vector<std::string>>& rows) {
  auto out = open_for_write(path);
  out << "# format_version=" << kFormatVersion << '\n';
  for (const auto& cmt : comments) out << "# " << cmt << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out << ',';
    out << columns[i];
  }
  out << '\n';
  for (const auto& row : rows) {
    if (row.size() != columns.size()) throw DataError("csv row width mismatch: " + path.string());
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  }
  if (!out.good()) throw DataError("write failed: " + path.string());
}

SceneFile ingest_scene(const fs::path& detections_path, const fs::path& poses_path) {
  // Detections: header with the category table, then per-frame labeled boxes.
  auto din = open_for_read(detections_path);
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(din, line)) throw DataError(detections_path.string() + ": empty file");
  ++lineno;
  const json dheader = parse_json_line(line, detections_path, lineno);
  check_header(dheader, "external_detections", detections_path);
  CategoryTable categories =
      categories_from_json(require_field(dheader, "categories", detections_path, lineno),
                           detections_path);

  struct FrameAccum {
    std::vector<Detection2D> detections;
    std::vector<GroundTruthBox> boxes;
  };
  std::map<long, FrameAccum> det_frames;
  const auto centroid_of = [&](const json& bj, std::size_t ln) {
    if (!bj.is_array() || bj.size() != 4) {
      throw DataError(where(detections_path, ln) + ": box must be [x1, y1, x2, y2]");
    }
    const double x1 = bj[0].get<double>(), y1 = bj[1].get<double>();
    const double x2 = bj[2].get<double>(), y2 = bj[3].get<double>();
    if (!(x2 > x1) || !(y2 > y1)) {
      throw DataError(where(detections_path, ln) + ": box corners out of order");
    }
    return std::array<double, 4>{(x1 + x2) / 2.0, (y1 + y2) / 2.0, (x2 - x1) / 2.0,
                                 (y2 - y1) / 2.0};
  };
  const auto category_of = [&](const json& rec, std::size_t ln) {
    const std::string label = require_field(rec, "label", detections_path, ln).get<std::string>();
    const auto idx = categories.index_of(label);
    if (!idx.has_value()) {
      throw DataError(where(detections_path, ln) + ": unknown category label '" + label + "'");
    }
    return *idx;
  };
  while (std::getline(din, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json rec = parse_json_line(line, detections_path, lineno);
    const long frame = require_field(rec, "frame", detections_path, lineno).get<long>();
    FrameAccum& acc = det_frames[frame];
    if (rec.contains("detections")) {
      for (const auto& dj : rec["detections"]) {
        const std::size_t cat = category_of(dj, lineno);
        const auto c = centroid_of(require_field(dj, "box", detections_path, lineno), lineno);
        acc.detections.push_back({c[0], c[1], cat});
      }
    }
    if (rec.contains("truth_boxes")) {
      for (const auto& bj : rec["truth_boxes"]) {
        const std::size_t cat = category_of(bj, lineno);
        const auto c = centroid_of(require_field(bj, "box", detections_path, lineno), lineno);
        GroundTruthBox box;
        box.center_x = c[0];
        box.center_y = c[1];
        box.half_width = c[2];
        box.half_height = c[3];
        box.category = cat;
        acc.boxes.push_back(box);
      }
    }
  }
  if (det_frames.empty()) throw DataError(detections_path.string() + ": no frame records");

  // Poses: one camera per frame index.
  auto pin = open_for_read(poses_path);
  lineno = 0;
  if (!std::getline(pin, line)) throw DataError(poses_path.string() + ": empty file");
  ++lineno;
  const json pheader = parse_json_line(line, poses_path, lineno);
  check_header(pheader, "camera_poses", poses_path);
  std::map<long, CameraPose> poses;
  while (std::getline(pin, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json rec = parse_json_line(line, poses_path, lineno);
    const long frame = require_field(rec, "frame", poses_path, lineno).get<long>();
    if (poses.count(frame)) {
      throw DataError(where(poses_path, lineno) + ": duplicate pose for frame " +
                      std::to_string(frame));
    }
    const json& cam = require_field(rec, "camera", poses_path, lineno);
    CameraPose pose;
    pose.position = vec3_from_json(require_field(cam, "pos", poses_path, lineno), poses_path, lineno);
    pose.focal_point =
        vec3_from_json(require_field(cam, "focal", poses_path, lineno), poses_path, lineno);
    poses.emplace(frame, pose);
  }

  for (const auto& [frame, acc] : det_frames) {
    if (!poses.count(frame)) {
      throw DataError(poses_path.string() + ": missing pose for frame " + std::to_string(frame));
    }
  }
  for (const auto& [frame, pose] : poses) {
    if (!det_frames.count(frame)) {
      throw DataError(detections_path.string() + ": missing detection record for frame " +
                      std::to_string(frame));
    }
  }

  SceneFile file;
  file.categories = std::move(categories);
  bool any_boxes = false;
  for (auto& [frame, acc] : det_frames) {
    FrameObservation obs;
    obs.camera = poses.at(frame);
    obs.detections = std::move(acc.detections);
    file.scene.frames.push_back(std::move(obs));
    if (!acc.boxes.empty()) any_boxes = true;
    file.truth_boxes.push_back(std::move(acc.boxes));
  }
  if (!any_boxes) file.truth_boxes.clear();
  return file;
}

}  // namespace metacog
