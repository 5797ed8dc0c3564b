#include "metacog/trajectory.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace metacog {

namespace {

void validate_kernel(const KernelParams& k) {
  if (!(k.sigma >= 0.0)) throw std::invalid_argument("kernel: sigma must be >= 0");
  if (!(k.lengthscale > 0.0)) throw std::invalid_argument("kernel: lengthscale must be > 0");
}

// Lower-triangular Cholesky factor of a small dense SPD matrix.
std::vector<double> cholesky(std::vector<double> a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      if (i == j) {
        if (!(s > 0.0)) throw std::runtime_error("cholesky: matrix not positive definite");
        a[i * n + j] = std::sqrt(s);
      } else {
        a[i * n + j] = s / a[j * n + j];
      }
    }
    for (std::size_t j = i + 1; j < n; ++j) a[i * n + j] = 0.0;
  }
  return a;
}

}  // namespace

void TrajectoryParams::validate() const {
  if (num_frames < 1) throw std::invalid_argument("trajectory: num_frames must be >= 1");
  validate_kernel(path_kernel);
  validate_kernel(focal_kernel);
  if (!(room_x_span > 2.0) || !(room_z_span > 2.0)) {
    throw std::invalid_argument("trajectory: room spans must exceed the 1-unit orbit inset");
  }
}

std::vector<double> sample_gp(const KernelParams& kernel, std::span<const double> inputs,
                              Rng& rng) {
  validate_kernel(kernel);
  const std::size_t n = inputs.size();
  std::vector<double> out(n, 0.0);
  if (kernel.sigma == 0.0) {
    // Degenerate kernel: the process collapses onto its mean.
    for (std::size_t i = 0; i < n; ++i) rng.normal(0.0, 1.0);
    return out;
  }
  std::vector<double> gram(n * n);
  const double s2 = kernel.sigma * kernel.sigma;
  const double inv2l2 = 1.0 / (2.0 * kernel.lengthscale * kernel.lengthscale);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double d = inputs[i] - inputs[j];
      gram[i * n + j] = s2 * std::exp(-d * d * inv2l2);
    }
    gram[i * n + i] += 1e-8;
  }
  const std::vector<double> chol = cholesky(std::move(gram), n);
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = rng.normal(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j <= i; ++j) s += chol[i * n + j] * z[j];
    out[i] = s;
  }
  return out;
}

std::vector<CameraPose> sample_trajectory(const TrajectoryParams& params, Rng& rng) {
  params.validate();
  const std::size_t n = static_cast<std::size_t>(params.num_frames);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<double>(i);

  const std::vector<double> dx = sample_gp(params.path_kernel, t, rng);
  const std::vector<double> dz = sample_gp(params.path_kernel, t, rng);
  const std::vector<double> fx = sample_gp(params.focal_kernel, t, rng);
  const std::vector<double> fy = sample_gp(params.focal_kernel, t, rng);
  const std::vector<double> fz = sample_gp(params.focal_kernel, t, rng);

  const double a = params.room_x_span / 2.0 - 1.0;
  const double b = params.room_z_span / 2.0 - 1.0;
  std::vector<CameraPose> poses(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double phi = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    Vec3 pos{a * std::cos(phi) + dx[i], params.camera_height, b * std::sin(phi) + dz[i]};
    Vec3 focal = params.focal_mean + Vec3{fx[i], fy[i], fz[i]};
    if ((focal - pos).norm() < 1e-9) focal.x += 1e-6;
    poses[i] = CameraPose{pos, focal};
  }
  return poses;
}

}  // namespace metacog
