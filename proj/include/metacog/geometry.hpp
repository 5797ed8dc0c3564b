#pragma once

#include <optional>

#include "metacog/types.hpp"

namespace metacog {

struct CameraIntrinsics {
  int image_width = 800;
  int image_height = 800;
  double vertical_fov_deg = 60.0;

  void validate() const;
  // Focal length in pixels: (height/2) / tan(vfov/2).
  double focal_px() const;
};

struct Pixel {
  double x = 0.0, y = 0.0;
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
};

// Orthonormal view basis for a pose; view axis position -> focal_point,
// up-hint +y (falls back to +z when looking straight up or down).
struct CameraBasis {
  Vec3 forward, right, up;
  static CameraBasis from_pose(const CameraPose& pose);
};

// Pinhole projection. Absent when the point is on or behind the camera plane.
std::optional<Pixel> project(const Vec3& point, const CameraPose& pose,
                             const CameraIntrinsics& intr);

// True iff project() returns a pixel with 0 <= x <= width and 0 <= y <= height.
bool is_visible(const Vec3& point, const CameraPose& pose, const CameraIntrinsics& intr);

// Ray from the camera position through the given pixel.
Ray backproject(const Pixel& pixel, const CameraPose& pose, const CameraIntrinsics& intr);

}  // namespace metacog
