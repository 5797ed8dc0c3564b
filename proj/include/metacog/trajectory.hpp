#pragma once

#include <span>
#include <vector>

#include "metacog/geometry.hpp"
#include "metacog/rng.hpp"
#include "metacog/types.hpp"

namespace metacog {

struct KernelParams {
  double sigma = 0.7;        // output scale; 0 gives the exact mean path
  double lengthscale = 1.0;  // must be positive
};

struct TrajectoryParams {
  int num_frames = 20;
  KernelParams path_kernel{0.7, 2.5};
  KernelParams focal_kernel{0.7, 2.0};
  double camera_height = 2.0;
  double room_x_span = 12.0;
  double room_z_span = 8.0;
  Vec3 focal_mean{0.0, 1.0, 0.0};

  void validate() const;
};

// Draws a zero-mean Gaussian-process sample with an RBF kernel at the given
// inputs, via Cholesky factorization with 1e-8 diagonal jitter.
std::vector<double> sample_gp(const KernelParams& kernel, std::span<const double> inputs,
                              Rng& rng);

// Camera path: elliptical base orbit around the room periphery at constant
// height, with independent GP perturbations on the planar coordinates; focal
// points are GP-perturbed around a fixed mean above the floor center.
std::vector<CameraPose> sample_trajectory(const TrajectoryParams& params, Rng& rng);

}  // namespace metacog
