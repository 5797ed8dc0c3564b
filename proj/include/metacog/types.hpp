#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace metacog {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const;
};

// Ordered category labels; indices are stable for a run.
struct CategoryTable {
  std::vector<std::string> names;

  std::size_t size() const { return names.size(); }
  std::optional<std::size_t> index_of(const std::string& name) const;
  void validate() const;  // throws std::invalid_argument on duplicates / empty

  // The five categories used by the reference experiments.
  static CategoryTable standard();
};

// Per-category detector error parameters of the full spatial model.
// hallucination_rates are Poisson rates per frame; detection counts per
// visible object follow P(N=n) = p^n (1-p), so the miss rate is 1-p.
struct Theta {
  std::vector<double> halluc_rates;
  std::vector<double> det_rates;

  std::size_t size() const { return halluc_rates.size(); }
  void validate() const;
};

struct Object3D {
  Vec3 position;
  std::size_t category = 0;
};

// Fixed set of objects underlying one scene (object permanence).
struct WorldState {
  std::vector<Object3D> objects;
};

struct Detection2D {
  double x = 0.0, y = 0.0;
  std::size_t category = 0;
};

struct CameraPose {
  Vec3 position;
  Vec3 focal_point;
};

struct FrameObservation {
  CameraPose camera;
  std::vector<Detection2D> detections;
};

// One scene: ordered frames plus optional ground truth. Ground truth is for
// evaluation only and is never read by inference.
struct SceneData {
  std::vector<FrameObservation> frames;
  std::optional<WorldState> ground_truth;
};

}  // namespace metacog
