#include "nvsc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "nvsc/errors.hpp"

namespace nvsc {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

// Coefficients of the Rodrigues-type series, with Taylor fallbacks near zero.
// a = sin(t)/t, b = (1 - cos t)/t^2, c = (t - sin t)/t^3
struct SeriesCoeffs {
  double b, c;
};

SeriesCoeffs rodrigues_coeffs(double theta) {
  const double t2 = theta * theta;
  if (theta < 1e-3) {
    return {0.5 - t2 / 24.0 + t2 * t2 / 720.0, 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0};
  }
  return {(1.0 - std::cos(theta)) / t2, (theta - std::sin(theta)) / (t2 * theta)};
}

}  // namespace

Pose Pose::from_center(const Eigen::Quaterniond& rotation, const Vec3& center) {
  Pose p;
  p.rotation = rotation.normalized();
  p.translation = -(p.rotation * center);
  return p;
}

Pose Pose::look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) right = forward.unitOrthogonal();
  right.normalize();
  const Vec3 down = forward.cross(right);
  Mat3 r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = forward.transpose();
  return from_center(Eigen::Quaterniond(r), eye);
}

Intrinsics Intrinsics::default_for(int width, int height) {
  Intrinsics k;
  k.width = width;
  k.height = height;
  k.fx = k.fy = static_cast<double>(width);
  k.cx = width / 2;
  k.cy = height / 2;
  return k;
}

bool Intrinsics::valid() const {
  return width > 0 && height > 0 && fx > 0 && fy > 0 && cx >= 0 && cx < width && cy >= 0 &&
         cy < height;
}

void Intrinsics::validate() const {
  if (!valid()) throw DomainError("invalid intrinsics");
}

Mat3 hat(const Vec3& w) {
  Mat3 m;
  m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return m;
}

Eigen::Quaterniond so3_exp(const Vec3& omega) {
  const double theta = omega.norm();
  const double half = 0.5 * theta;
  // sin(half)/theta, series below 1e-4
  const double k = theta < 1e-4 ? 0.5 - theta * theta / 48.0 : std::sin(half) / theta;
  Eigen::Quaterniond q(std::cos(half), k * omega.x(), k * omega.y(), k * omega.z());
  return q.normalized();
}

Vec3 so3_log(const Eigen::Quaterniond& q_in) {
  Eigen::Quaterniond q = q_in.normalized();
  if (q.w() < 0) q.coeffs() = -q.coeffs();
  const Vec3 v = q.vec();
  const double s = v.norm();
  // theta = 2 atan2(s, w); scale = theta / s
  if (s < 1e-8) {
    // atan2(s,w)/s ~ 1/w - s^2/(3 w^3)
    const double w = q.w();
    return (2.0 / w - 2.0 * s * s / (3.0 * w * w * w)) * v;
  }
  const double theta = 2.0 * std::atan2(s, q.w());
  return (theta / s) * v;
}

Mat3 so3_left_jacobian(const Vec3& omega) {
  const double theta = omega.norm();
  const auto [b, c] = rodrigues_coeffs(theta);
  const Mat3 w = hat(omega);
  return Mat3::Identity() + b * w + c * w * w;
}

Pose se3_exp(const Twist& xi) {
  const Vec3 omega = xi.head<3>();
  const Vec3 v = xi.tail<3>();
  Pose p;
  p.rotation = so3_exp(omega);
  p.translation = so3_left_jacobian(omega) * v;
  return p;
}

Twist se3_log(const Pose& p) {
  const Vec3 omega = so3_log(p.rotation);
  const double theta = omega.norm();
  const Mat3 w = hat(omega);
  // V^-1 = I - W/2 + d W^2, d = (1 - theta sin(theta) / (2 (1 - cos theta))) / theta^2
  double d;
  if (theta < 1e-3) {
    const double t2 = theta * theta;
    d = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  } else {
    d = (1.0 - theta * std::sin(theta) / (2.0 * (1.0 - std::cos(theta)))) / (theta * theta);
  }
  const Mat3 v_inv = Mat3::Identity() - 0.5 * w + d * w * w;
  Twist xi;
  xi.head<3>() = omega;
  xi.tail<3>() = v_inv * p.translation;
  return xi;
}

Mat6 se3_left_jacobian(const Twist& xi) {
  const Vec3 phi = xi.head<3>();
  const Vec3 rho = xi.tail<3>();
  const double theta = phi.norm();
  const double t2 = theta * theta;

  double c1, c2, c3;
  if (theta < 0.05) {
    const double t4 = t2 * t2, t6 = t4 * t2;
    c1 = 1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0 - t6 / 362880.0;
    c2 = 1.0 / 24.0 - t2 / 720.0 + t4 / 40320.0 - t6 / 3628800.0;
    c3 = 1.0 / 120.0 - t2 / 2520.0 + t4 / 120960.0 - t6 / 9979200.0;
  } else {
    const double s = std::sin(theta), c = std::cos(theta);
    c1 = (theta - s) / (t2 * theta);
    c2 = (t2 + 2.0 * c - 2.0) / (2.0 * t2 * t2);
    c3 = (2.0 * theta - 3.0 * s + theta * c) / (2.0 * t2 * t2 * theta);
  }

  const Mat3 P = hat(phi);
  const Mat3 Rh = hat(rho);
  const Mat3 PR = P * Rh;
  const Mat3 RP = Rh * P;
  const Mat3 PRP = PR * P;
  const Mat3 Q = 0.5 * Rh + c1 * (PR + RP + PRP) + c2 * (P * PR + RP * P - 3.0 * PRP) +
                 c3 * (PRP * P + P * PRP);

  const Mat3 J = so3_left_jacobian(phi);
  Mat6 out = Mat6::Zero();
  out.topLeftCorner<3, 3>() = J;
  out.bottomLeftCorner<3, 3>() = Q;
  out.bottomRightCorner<3, 3>() = J;
  return out;
}

Pose pose_compose(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = (a.rotation * b.rotation).normalized();
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

Pose pose_inverse(const Pose& p) {
  Pose out;
  out.rotation = p.rotation.conjugate();
  out.translation = -(out.rotation * p.translation);
  return out;
}

std::optional<Projection> project_point(const Pose& pose, const Intrinsics& k, const Vec3& point,
                                        double near_plane) {
  const Vec3 xc = pose.transform(point);
  if (xc.z() <= near_plane) return std::nullopt;
  const double inv_z = 1.0 / xc.z();
  return Projection{Vec2(k.fx * xc.x() * inv_z + k.cx, k.fy * xc.y() * inv_z + k.cy), xc.z()};
}

Pose apply_perturbation(const Pose& pose, const Perturbation& p) {
  Twist xi = Twist::Zero();
  if (p.kind == PerturbKind::rotation) {
    xi[p.axis] = p.amount * kDegToRad;
  } else {
    xi[3 + p.axis] = p.amount;
  }
  return pose_compose(se3_exp(xi), pose);
}

Perturbation sample_perturbation(Rng& rng, double trans_range, double rot_range_deg) {
  if (trans_range < 0 || rot_range_deg < 0) throw DomainError("negative perturbation range");
  Perturbation p;
  p.kind = rng.index(2) == 0 ? PerturbKind::translation : PerturbKind::rotation;
  p.axis = static_cast<int>(rng.index(3));
  const double range = p.kind == PerturbKind::rotation ? rot_range_deg : trans_range;
  p.amount = rng.uniform(-range, range);
  return p;
}

Pose perturb_pose(const Pose& pose, Rng& rng, double trans_range, double rot_range_deg) {
  const Perturbation p = sample_perturbation(rng, trans_range, rot_range_deg);
  if (p.amount == 0.0) return pose;
  return apply_perturbation(pose, p);
}

PoseError pose_error(const Pose& a, const Pose& b) {
  const Eigen::Quaterniond rel = a.rotation * b.rotation.conjugate();
  const double s = rel.vec().norm();
  const double angle = 2.0 * std::atan2(s, std::abs(rel.w()));
  return {angle * kRadToDeg, (a.center() - b.center()).norm()};
}

std::vector<Pose> generate_lawnmower_trajectory(const Box& bounds, double standoff, int rows,
                                                int steps) {
  if (rows < 1 || steps < 2) throw DomainError("trajectory needs rows >= 1 and steps >= 2");
  if (!bounds.valid()) throw InvalidBounds("trajectory bounds are degenerate");
  if (!(standoff > 0)) throw DomainError("standoff must be positive");

  const Vec3 c = bounds.center();
  const Vec3 e = bounds.extent();
  const double y = bounds.min.y() - standoff;
  const double row_spacing = std::min(standoff / 12.0, rows > 1 ? 0.5 * e.z() / (rows - 1) : 0.0);
  const double x0 = bounds.min.x() + 0.1 * e.x();
  const double x1 = bounds.max.x() - 0.1 * e.x();

  std::vector<Pose> poses;
  poses.reserve(static_cast<std::size_t>(rows) * steps);
  for (int r = 0; r < rows; ++r) {
    const double z = c.z() + (r - 0.5 * (rows - 1)) * row_spacing;
    for (int s = 0; s < steps; ++s) {
      const int i = (r % 2 == 0) ? s : steps - 1 - s;
      const double x = x0 + (x1 - x0) * i / (steps - 1);
      const Vec3 eye(x, y, z);
      poses.push_back(Pose::look_at(eye, Vec3(c.x(), c.y(), z)));
    }
  }
  return poses;
}

std::string format_pose(const Pose& p) {
  std::ostringstream os;
  os.precision(17);
  os << p.rotation.w() << ' ' << p.rotation.x() << ' ' << p.rotation.y() << ' '
     << p.rotation.z() << ' ' << p.translation.x() << ' ' << p.translation.y() << ' '
     << p.translation.z();
  return os.str();
}

Pose parse_pose(const std::string& text) {
  std::istringstream is(text);
  double v[7];
  for (double& x : v) {
    if (!(is >> x)) throw DomainError("pose needs 7 numbers: qw qx qy qz tx ty tz");
  }
  Eigen::Quaterniond q(v[0], v[1], v[2], v[3]);
  if (std::abs(q.norm() - 1.0) > 1e-6) throw DomainError("pose quaternion is not unit length");
  Pose p;
  p.rotation = q.normalized();
  p.translation = Vec3(v[4], v[5], v[6]);
  return p;
}

}  // namespace nvsc
