#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "metacog/eval.hpp"
#include "metacog/simulator.hpp"
#include "metacog/types.hpp"

namespace metacog {

// Bad configuration (flags, config values); the CLI maps this to exit 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad input data (schema, values, missing files); the CLI maps this to exit 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kFormatVersion = 1;

// Stable hex digest of a configuration object (keys are serialized in sorted
// order by the JSON library). Embedded into every output file.
std::string config_hash(const nlohmann::json& config);

// Shortest round-trip decimal form of a double.
std::string format_double(double v);

struct FileStamp {
  std::uint64_t seed = 0;
  std::string config_hash;
};

// One synthetic detector benchmark file: a header record with the true
// parameters followed by one record per world state.
void write_lw_detector_file(const std::filesystem::path& path, const LwDetectorData& detector,
                            const FileStamp& stamp, const CategoryTable& categories);
LwDetectorData read_lw_detector_file(const std::filesystem::path& path);

// One multi-view scene file: header record, then one record per frame
// (camera pose, detections, optional ground-truth boxes), then an optional
// ground-truth world record.
struct SceneFile {
  SceneData scene;
  std::vector<std::vector<GroundTruthBox>> truth_boxes;  // empty, or one list per frame
  CategoryTable categories;
};

void write_scene_file(const std::filesystem::path& path, const SceneFile& file,
                      const FileStamp& stamp);
SceneFile read_scene_file(const std::filesystem::path& path);

// Dataset manifest: format stamp, category table, free-form config (which
// may embed the generating parameters), and the member file names.
struct Manifest {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string kind;
  CategoryTable categories;
  nlohmann::json config;
  std::vector<std::string> files;
};

void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);

// CSV with `#`-prefixed provenance comments, a column-name row, then data
// rows (cells preformatted).
void write_csv(const std::filesystem::path& path, std::span<const std::string> comments,
               std::span<const std::string> columns,
               const std::vector<std::vector<std::string>>& rows);

// External-detector bridge: per-frame labeled boxes plus a camera-pose file
// become one engine scene (detections at box centroids). Unknown labels and
// frame mismatches are data errors naming the offender.
SceneFile ingest_scene(const std::filesystem::path& detections_path,
                       const std::filesystem::path& poses_path);

}  // namespace metacog
