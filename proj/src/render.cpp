#include "nvsc/render.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nvsc/errors.hpp"

namespace nvsc {

namespace {

constexpr int kTile = 16;
constexpr double kCutoffQ = kFootprintSigmas * kFootprintSigmas;

// Opacity falloff as a function of the squared Mahalanobis distance q, and its
// derivative. The Gaussian minus its tangent line at the 3-sigma ellipse,
// rescaled to 1 at the centre: value and slope both reach zero at the cutoff,
// so alpha is continuously differentiable in the pose.
struct Falloff {
  double value;
  double dq;
};

inline Falloff falloff(double q) {
  if (q >= kCutoffQ) return {0.0, 0.0};
  static const double edge = std::exp(-0.5 * kCutoffQ);
  static const double scale = 1.0 / (1.0 - edge * (1.0 + 0.5 * kCutoffQ));
  const double g = std::exp(-0.5 * q);
  return {(g - edge * (1.0 + 0.5 * (kCutoffQ - q))) * scale, -0.5 * (g - edge) * scale};
}

// Everything the rasteriser and its backward pass need about one splat.
struct Prepared {
  int index;  // position in the scene
  Splat2D splat;
  double ca, cb, cc;  // conic = cov2d^-1 = [[ca, cb], [cb, cc]]
  int x0, x1, y0, y1;  // inclusive pixel footprint
  // camera-space state for the pose gradient
  Vec3 xc;
  Mat3 cov_cam;
  Eigen::Matrix<double, 2, 3> jac;
};

struct ProjectedScene {
  std::vector<Prepared> splats;  // depth order
  int tiles_x = 0, tiles_y = 0;
  std::vector<std::vector<int>> tile_lists;  // indices into splats, depth order
};

std::optional<Prepared> prepare(const Gaussian3D& g, int index, const Pose& pose, const Mat3& rot,
                                const Intrinsics& k, const RenderOptions& opts) {
  const Vec3 xc = rot * g.mean.cast<double>() + pose.translation;
  if (xc.z() <= opts.near_plane) return std::nullopt;
  const double iz = 1.0 / xc.z();
  Prepared p;
  p.index = index;
  p.xc = xc;
  p.cov_cam = rot * g.covariance() * rot.transpose();
  p.jac << k.fx * iz, 0.0, -k.fx * xc.x() * iz * iz, 0.0, k.fy * iz, -k.fy * xc.y() * iz * iz;

  Splat2D& s = p.splat;
  s.mean2d = Vec2(k.fx * xc.x() * iz + k.cx, k.fy * xc.y() * iz + k.cy);
  s.cov2d = p.jac * p.cov_cam * p.jac.transpose();
  s.cov2d(0, 0) += opts.cov_regularizer;
  s.cov2d(1, 1) += opts.cov_regularizer;
  s.cov2d(0, 1) = s.cov2d(1, 0) = 0.5 * (s.cov2d(0, 1) + s.cov2d(1, 0));
  s.depth = xc.z();
  s.color = g.color.cast<double>();
  s.opacity = g.opacity;

  const double a = s.cov2d(0, 0), b = s.cov2d(0, 1), c = s.cov2d(1, 1);
  const double det = a * c - b * b;
  if (!(det > 0.0) || !std::isfinite(det)) return std::nullopt;
  p.ca = c / det;
  p.cb = -b / det;
  p.cc = a / det;

  // Axis-aligned extent of the 3-sigma ellipse.
  const double rx = kFootprintSigmas * std::sqrt(a);
  const double ry = kFootprintSigmas * std::sqrt(c);
  const double fx0 = std::ceil(s.mean2d.x() - rx), fx1 = std::floor(s.mean2d.x() + rx);
  const double fy0 = std::ceil(s.mean2d.y() - ry), fy1 = std::floor(s.mean2d.y() + ry);
  if (fx1 < 0 || fy1 < 0 || fx0 > k.width - 1 || fy0 > k.height - 1) return std::nullopt;
  p.x0 = static_cast<int>(std::max(fx0, 0.0));
  p.x1 = static_cast<int>(std::min(fx1, static_cast<double>(k.width - 1)));
  p.y0 = static_cast<int>(std::max(fy0, 0.0));
  p.y1 = static_cast<int>(std::min(fy1, static_cast<double>(k.height - 1)));
  if (p.x0 > p.x1 || p.y0 > p.y1) return std::nullopt;
  return p;
}

ProjectedScene project_scene(const Scene& scene, const Pose& pose, const Intrinsics& k,
                             const RenderOptions& opts) {
  k.validate();
  if (k.pixel_count() > opts.max_pixels) {
    throw DomainError("image of " + std::to_string(k.pixel_count()) + " px exceeds render limit");
  }
  ProjectedScene ps;
  const Mat3 rot = pose.R();
  ps.splats.reserve(scene.gaussians.size());
  for (std::size_t i = 0; i < scene.gaussians.size(); ++i) {
    if (auto p = prepare(scene.gaussians[i], static_cast<int>(i), pose, rot, k, opts)) {
      ps.splats.push_back(*p);
    }
  }
  std::stable_sort(ps.splats.begin(), ps.splats.end(), [](const Prepared& a, const Prepared& b) {
    if (a.splat.depth != b.splat.depth) return a.splat.depth < b.splat.depth;
    return a.index < b.index;
  });

  ps.tiles_x = (k.width + kTile - 1) / kTile;
  ps.tiles_y = (k.height + kTile - 1) / kTile;
  ps.tile_lists.assign(static_cast<std::size_t>(ps.tiles_x) * ps.tiles_y, {});
  for (std::size_t i = 0; i < ps.splats.size(); ++i) {
    const Prepared& p = ps.splats[i];
    for (int ty = p.y0 / kTile; ty <= p.y1 / kTile; ++ty) {
      for (int tx = p.x0 / kTile; tx <= p.x1 / kTile; ++tx) {
        ps.tile_lists[static_cast<std::size_t>(ty) * ps.tiles_x + tx].push_back(static_cast<int>(i));
      }
    }
  }
  return ps;
}

struct Contribution {
  int splat;  // index into ProjectedScene::splats
  double alpha;
  double transmittance;  // before this splat
  double dx, dy, q;
};

// Front-to-back compositing of one pixel. Fills `trace` when non-null.
inline Vec3 shade_pixel(const ProjectedScene& ps, const std::vector<int>& list, int x, int y,
                        const Vec3& background, double min_t, std::vector<Contribution>* trace) {
  Vec3 color = Vec3::Zero();
  double t = 1.0;
  if (trace) trace->clear();
  for (int idx : list) {
    const Prepared& p = ps.splats[static_cast<std::size_t>(idx)];
    if (x < p.x0 || x > p.x1 || y < p.y0 || y > p.y1) continue;
    const double dx = x - p.splat.mean2d.x();
    const double dy = y - p.splat.mean2d.y();
    const double q = p.ca * dx * dx + 2.0 * p.cb * dx * dy + p.cc * dy * dy;
    const Falloff f = falloff(q);
    if (f.value == 0.0) continue;
    const double alpha = p.splat.opacity * f.value;
    if (trace) trace->push_back({idx, alpha, t, dx, dy, q});
    color += (alpha * t) * p.splat.color;
    t *= 1.0 - alpha;
    if (t < min_t) break;
  }
  color += t * background;
  return color;
}

template <typename PixelFn>
void for_each_pixel(const ProjectedScene& ps, const Intrinsics& k, PixelFn&& fn) {
  for (int ty = 0; ty < ps.tiles_y; ++ty) {
    for (int tx = 0; tx < ps.tiles_x; ++tx) {
      const auto& list = ps.tile_lists[static_cast<std::size_t>(ty) * ps.tiles_x + tx];
      const int ye = std::min((ty + 1) * kTile, k.height);
      const int xe = std::min((tx + 1) * kTile, k.width);
      for (int y = ty * kTile; y < ye; ++y) {
        for (int x = tx * kTile; x < xe; ++x) fn(list, x, y);
      }
    }
  }
}

Image rasterize(const ProjectedScene& ps, const Scene& scene, const Intrinsics& k,
                const RenderOptions& opts) {
  Image img(k.width, k.height);
  const Vec3 bg = scene.background.cast<double>();
  for_each_pixel(ps, k, [&](const std::vector<int>& list, int x, int y) {
    const Vec3 c = shade_pixel(ps, list, x, y, bg, opts.min_transmittance, nullptr);
    for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = std::clamp(c[ch], 0.0, 1.0);
  });
  return img;
}

}  // namespace

std::optional<Splat2D> project_gaussian(const Gaussian3D& g, const Pose& pose, const Intrinsics& k,
                                        const RenderOptions& opts) {
  k.validate();
  auto p = prepare(g, 0, pose, pose.R(), k, opts);
  if (!p) return std::nullopt;
  return p->splat;
}

Image render(const Scene& scene, const Pose& pose, const Intrinsics& k, const RenderOptions& opts) {
  const ProjectedScene ps = project_scene(scene, pose, k, opts);
  return rasterize(ps, scene, k, opts);
}

std::pair<double, Vec6> mse_and_pose_gradient(const Scene& scene, const Pose& pose,
                                              const Intrinsics& k, const Image& target,
                                              const RenderOptions& opts) {
  if (target.width != k.width || target.height != k.height) {
    throw ShapeMismatch("target image does not match intrinsics");
  }
  const ProjectedScene ps = project_scene(scene, pose, k, opts);
  const Image rendered = rasterize(ps, scene, k, opts);
  const double loss = mse(rendered, target);
  const double norm = 2.0 / static_cast<double>(rendered.data.size());
  const Vec3 bg = scene.background.cast<double>();

  // Per-splat gradients w.r.t. the 2D mean and the conic (ca, cb, cc).
  std::vector<Vec2> g_mean(ps.splats.size(), Vec2::Zero());
  std::vector<Eigen::Vector3d> g_conic(ps.splats.size(), Eigen::Vector3d::Zero());
  std::vector<Contribution> trace;
  trace.reserve(64);

  for_each_pixel(ps, k, [&](const std::vector<int>& list, int x, int y) {
    shade_pixel(ps, list, x, y, bg, opts.min_transmittance, &trace);
    if (trace.empty()) return;
    Vec3 dl_dc;
    for (int ch = 0; ch < 3; ++ch) dl_dc[ch] = norm * (rendered.at(x, y, ch) - target.at(x, y, ch));
    if (dl_dc.isZero(0.0)) return;
    Vec3 behind = bg;  // colour composited behind the current splat
    for (auto it = trace.rbegin(); it != trace.rend(); ++it) {
      const Prepared& p = ps.splats[static_cast<std::size_t>(it->splat)];
      const double g_alpha = it->transmittance * dl_dc.dot(p.splat.color - behind);
      behind = it->alpha * p.splat.color + (1.0 - it->alpha) * behind;
      const double g_q = g_alpha * p.splat.opacity * falloff(it->q).dq;
      // q = ca dx^2 + 2 cb dx dy + cc dy^2, d = pixel - mean
      Vec2& gm = g_mean[static_cast<std::size_t>(it->splat)];
      gm.x() -= g_q * 2.0 * (p.ca * it->dx + p.cb * it->dy);
      gm.y() -= g_q * 2.0 * (p.cb * it->dx + p.cc * it->dy);
      Eigen::Vector3d& gc = g_conic[static_cast<std::size_t>(it->splat)];
      gc[0] += g_q * it->dx * it->dx;
      gc[1] += g_q * 2.0 * it->dx * it->dy;
      gc[2] += g_q * it->dy * it->dy;
    }
  });

  Vec6 grad = Vec6::Zero();
  for (std::size_t i = 0; i < ps.splats.size(); ++i) {
    const Prepared& p = ps.splats[i];
    if (g_mean[i].isZero(0.0) && g_conic[i].isZero(0.0)) continue;
    // dL/dA as a symmetric matrix, then dL/dSigma2 = -A (dL/dA) A.
    Eigen::Matrix2d conic;
    conic << p.ca, p.cb, p.cb, p.cc;
    Eigen::Matrix2d g_a;
    g_a << g_conic[i][0], 0.5 * g_conic[i][1], 0.5 * g_conic[i][1], g_conic[i][2];
    const Eigen::Matrix2d g_cov2d = -conic * g_a * conic;

    const Vec3& xc = p.xc;
    const double iz = 1.0 / xc.z();
    for (int d = 0; d < 6; ++d) {
      Vec3 dx;
      Mat3 dcov = Mat3::Zero();
      if (d < 3) {
        const Mat3 e = hat(Vec3::Unit(d));
        dx = e * xc;
        dcov = e * p.cov_cam - p.cov_cam * e;
      } else {
        dx = Vec3::Unit(d - 3);
      }
      const Vec2 dmean = p.jac * dx;
      Eigen::Matrix<double, 2, 3> djac;
      djac << -k.fx * dx.z() * iz * iz, 0.0,
          -k.fx * (dx.x() * iz * iz - 2.0 * xc.x() * dx.z() * iz * iz * iz), 0.0,
          -k.fy * dx.z() * iz * iz, -k.fy * (dx.y() * iz * iz - 2.0 * xc.y() * dx.z() * iz * iz * iz);
      const Eigen::Matrix2d dcov2d = djac * p.cov_cam * p.jac.transpose() +
                                     p.jac * p.cov_cam * djac.transpose() +
                                     p.jac * dcov * p.jac.transpose();
      grad[d] += g_mean[i].dot(dmean) + (g_cov2d.array() * dcov2d.array()).sum();
    }
  }
  return {loss, grad};
}

LossAndGrad loss_and_grad(const Scene& scene, const Pose& base_pose, const Twist& twist,
                          const Image& target, const Intrinsics& k, const LossOptions& opts) {
  if (target.width != k.width || target.height != k.height) {
    throw ShapeMismatch("target image does not match intrinsics");
  }
  const Pose pose = pose_compose(se3_exp(twist), base_pose);
  if (opts.objective == Objective::mse) {
    auto [loss, g_delta] = mse_and_pose_gradient(scene, pose, k, target, opts.render);
    const Vec6 g = se3_left_jacobian(twist).transpose() * g_delta;
    return {loss, g};
  }

  const auto camera_kps = detect_keypoints(target, opts.match);
  auto eval = [&](const Twist& t) {
    const Image img = render(scene, pose_compose(se3_exp(t), base_pose), k, opts.render);
    return matching_loss(target, camera_kps, img, opts.match);
  };
  LossAndGrad out;
  out.loss = eval(twist);
  const double h = opts.matching_fd_step;
  for (int d = 0; d < 6; ++d) {
    Twist tp = twist, tm = twist;
    tp[d] += h;
    tm[d] -= h;
    out.grad[d] = (eval(tp) - eval(tm)) / (2.0 * h);
  }
  return out;
}

double loss_at(const Scene& scene, const Pose& base_pose, const Twist& twist, const Image& target,
               const Intrinsics& k, const LossOptions& opts) {
  const Image img = render(scene, pose_compose(se3_exp(twist), base_pose), k, opts.render);
  if (opts.objective == Objective::mse) return mse(img, target);
  return matching_loss(target, img, opts.match);
}

}  // namespace nvsc
