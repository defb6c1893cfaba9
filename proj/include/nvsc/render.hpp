#pragma once

// Gaussian splat rasteriser with analytic pose gradients.
//
// Each Gaussian is projected to an image-space ellipse (EWA approximation),
// splats are depth-sorted (ties by scene index) and alpha-composited front to
// back per pixel. Pixel (x, y) is sampled at integer coordinates (x, y).

#include <optional>
#include <utility>

#include <Eigen/Core>

#include "nvsc/geometry.hpp"
#include "nvsc/image.hpp"
#include "nvsc/objectives.hpp"
#include "nvsc/scene.hpp"

namespace nvsc {

struct Splat2D {
  Vec2 mean2d;
  Eigen::Matrix2d cov2d;
  double depth = 0;
  Vec3 color = Vec3::Zero();
  double opacity = 0;
};

struct RenderOptions {
  double near_plane = kNearPlane;
  long max_pixels = 1'048'576;
  // Added to the diagonal of every projected covariance, pixels^2.
  double cov_regularizer = 0.3;
  // Compositing stops once transmittance falls below this.
  double min_transmittance = 1e-4;
};

inline constexpr double kFootprintSigmas = 3.0;

// nullopt when the mean is at or behind the near plane, or the 3-sigma
// footprint misses the image entirely.
std::optional<Splat2D> project_gaussian(const Gaussian3D& g, const Pose& pose, const Intrinsics& k,
                                        const RenderOptions& opts = {});

Image render(const Scene& scene, const Pose& pose, const Intrinsics& k, const RenderOptions& opts = {});

// Gradient of L_mse(render(pose), target) with respect to a left perturbation
// exp(delta) * pose, evaluated at delta = 0. Returns (loss, gradient).
std::pair<double, Vec6> mse_and_pose_gradient(const Scene& scene, const Pose& pose,
                                              const Intrinsics& k, const Image& target,
                                              const RenderOptions& opts = {});

enum class Objective { mse, matching };

struct LossOptions {
  Objective objective = Objective::mse;
  MatchConfig match;
  // Central-difference step for the matching objective.
  double matching_fd_step = 2e-3;
  RenderOptions render;
};

struct LossAndGrad {
  double loss;
  Vec6 grad;
};

// Loss at exp(twist) * base_pose and its gradient with respect to twist.
// mse: analytic. matching: central differences over the six coordinates.
LossAndGrad loss_and_grad(const Scene& scene, const Pose& base_pose, const Twist& twist,
                          const Image& target, const Intrinsics& k, const LossOptions& opts = {});

// Loss only, no gradient.
double loss_at(const Scene& scene, const Pose& base_pose, const Twist& twist, const Image& target,
               const Intrinsics& k, const LossOptions& opts = {});

}  // namespace nvsc
