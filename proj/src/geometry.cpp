#include "metacog/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace metacog {

void CameraIntrinsics::validate() const {
  if (image_width < 1 || image_height < 1) {
    throw std::invalid_argument("intrinsics: image dimensions must be >= 1");
  }
  if (!(vertical_fov_deg > 0.0) || !(vertical_fov_deg < 180.0)) {
    throw std::invalid_argument("intrinsics: vertical fov must lie in (0, 180)");
  }
}

double CameraIntrinsics::focal_px() const {
  const double half_fov = vertical_fov_deg * std::numbers::pi / 360.0;
  return (image_height / 2.0) / std::tan(half_fov);
}

CameraBasis CameraBasis::from_pose(const CameraPose& pose) {
  const Vec3 d = pose.focal_point - pose.position;
  if (!(d.norm() > 0.0)) {
    throw std::invalid_argument("camera pose: position equals focal point");
  }
  const Vec3 forward = d.normalized();
  Vec3 up_hint{0.0, 1.0, 0.0};
  Vec3 right = up_hint.cross(forward);
  if (right.norm() < 1e-9) {
    up_hint = Vec3{0.0, 0.0, 1.0};
    right = up_hint.cross(forward);
  }
  right = right.normalized();
  const Vec3 up = forward.cross(right);
  return {forward, right, up};
}

std::optional<Pixel> project(const Vec3& point, const CameraPose& pose,
                             const CameraIntrinsics& intr) {
  const CameraBasis basis = CameraBasis::from_pose(pose);
  const Vec3 d = point - pose.position;
  const double zc = d.dot(basis.forward);
  if (zc <= 1e-12) return std::nullopt;
  const double f = intr.focal_px();
  const double px = intr.image_width / 2.0 + f * d.dot(basis.right) / zc;
  const double py = intr.image_height / 2.0 - f * d.dot(basis.up) / zc;
  return Pixel{px, py};
}

bool is_visible(const Vec3& point, const CameraPose& pose, const CameraIntrinsics& intr) {
  const auto px = project(point, pose, intr);
  return px && px->x >= 0.0 && px->x <= intr.image_width && px->y >= 0.0 &&
         px->y <= intr.image_height;
}

Ray backproject(const Pixel& pixel, const CameraPose& pose, const CameraIntrinsics& intr) {
  const CameraBasis basis = CameraBasis::from_pose(pose);
  const double f = intr.focal_px();
  const double xc = (pixel.x - intr.image_width / 2.0) / f;
  const double yc = (intr.image_height / 2.0 - pixel.y) / f;
  const Vec3 dir = (basis.right * xc + basis.up * yc + basis.forward).normalized();
  return Ray{pose.position, dir};
}

}  // namespace metacog
