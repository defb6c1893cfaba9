#pragma once

// Camera geometry.
//
// Convention: a Pose is the rigid world-to-camera transform, x_cam = R * x_world + t,
// with R stored as a unit quaternion. The camera frame is x right, y down, z forward.
// The camera centre in world coordinates is -R^T t (see Pose::center()).
//
// Twists are ordered (omega, v): rotation first, then translation. Optimisation
// perturbs a base pose on the left, p = exp(twist) * p0, i.e. in the camera frame.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "nvsc/rng.hpp"

namespace nvsc {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Ones();

  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 extent() const { return max - min; }
  double diameter() const { return extent().norm(); }
  bool valid() const { return (min.array() < max.array()).all(); }
  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
};

struct Pose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
  Mat3 R() const { return rotation.toRotationMatrix(); }
  Vec3 transform(const Vec3& world) const { return rotation * world + translation; }
  Vec3 center() const { return -(rotation.conjugate() * translation); }

  // Builds a pose from a camera centre and world-to-camera rotation.
  static Pose from_center(const Eigen::Quaterniond& rotation, const Vec3& center);
  // Camera at `eye` looking at `target`, with world `up` mapped to image-up.
  static Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());
};

using Twist = Vec6;

struct Intrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  // fx = fy = width, principal point at the image centre.
  static Intrinsics default_for(int width, int height);
  bool valid() const;
  void validate() const;
  long pixel_count() const { return static_cast<long>(width) * height; }
};

Mat3 hat(const Vec3& w);

Eigen::Quaterniond so3_exp(const Vec3& omega);
Vec3 so3_log(const Eigen::Quaterniond& q);
// Left Jacobian of SO(3); also the V matrix of the SE(3) exponential.
Mat3 so3_left_jacobian(const Vec3& omega);

Pose se3_exp(const Twist& xi);
Twist se3_log(const Pose& p);
// J such that exp(xi + d) ~= exp(J d) * exp(xi) to first order in d.
Mat6 se3_left_jacobian(const Twist& xi);

Pose pose_compose(const Pose& a, const Pose& b);
Pose pose_inverse(const Pose& p);

struct Projection {
  Vec2 pixel;
  double depth;
};

inline constexpr double kNearPlane = 0.05;

// nullopt means the point is at or behind the near plane.
std::optional<Projection> project_point(const Pose& pose, const Intrinsics& k, const Vec3& point,
                                        double near_plane = kNearPlane);

enum class PerturbKind { rotation, translation };

struct Perturbation {
  PerturbKind kind;
  int axis;       // camera-frame axis 0..2
  double amount;  // degrees for rotation, scene units for translation
};

// Rotation about the camera centre, or translation along a camera axis.
Pose apply_perturbation(const Pose& pose, const Perturbation& p);

// Picks rotation or translation with equal probability, one of three axes, and a
// magnitude uniform in [-range, range] of that kind.
Perturbation sample_perturbation(Rng& rng, double trans_range, double rot_range_deg);
Pose perturb_pose(const Pose& pose, Rng& rng, double trans_range, double rot_range_deg);

struct PoseError {
  double rotation_deg;
  double translation;  // distance between camera centres
};
PoseError pose_error(const Pose& a, const Pose& b);

// Boustrophedon survey in front of the box (cameras on the -y side looking +y),
// each camera yawed toward the box's vertical centre line. Rows are stacked
// vertically around the box centre at a spacing of at most standoff / 12.
std::vector<Pose> generate_lawnmower_trajectory(const Box& bounds, double standoff, int rows,
                                                int steps);

// "qw qx qy qz tx ty tz"
std::string format_pose(const Pose& p);
Pose parse_pose(const std::string& text);

}  // namespace nvsc
