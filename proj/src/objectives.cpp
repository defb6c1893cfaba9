#include "nvsc/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nvsc/errors.hpp"

namespace nvsc {

namespace {

constexpr double kMinResponse = 1e-9;

// Binomial 5-tap window for the structure tensor.
constexpr double kWindow[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

std::vector<double> harris_response(const std::vector<double>& lum, int w, int h, double kappa) {
  const auto L = [&](int x, int y) { return lum[static_cast<std::size_t>(y) * w + x]; };
  std::vector<double> ixx(lum.size(), 0.0), iyy(lum.size(), 0.0), ixy(lum.size(), 0.0);
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      const double gx = (L(x + 1, y - 1) + 2 * L(x + 1, y) + L(x + 1, y + 1) - L(x - 1, y - 1) -
                         2 * L(x - 1, y) - L(x - 1, y + 1)) / 8.0;
      const double gy = (L(x - 1, y + 1) + 2 * L(x, y + 1) + L(x + 1, y + 1) - L(x - 1, y - 1) -
                         2 * L(x, y - 1) - L(x + 1, y - 1)) / 8.0;
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      ixx[i] = gx * gx;
      iyy[i] = gy * gy;
      ixy[i] = gx * gy;
    }
  }
  std::vector<double> r(lum.size(), 0.0);
  for (int y = 3; y + 3 < h; ++y) {
    for (int x = 3; x + 3 < w; ++x) {
      double sxx = 0, syy = 0, sxy = 0;
      for (int v = -2; v <= 2; ++v) {
        for (int u = -2; u <= 2; ++u) {
          const double wt = kWindow[u + 2] * kWindow[v + 2];
          const std::size_t i = static_cast<std::size_t>(y + v) * w + (x + u);
          sxx += wt * ixx[i];
          syy += wt * iyy[i];
          sxy += wt * ixy[i];
        }
      }
      const double tr = sxx + syy;
      r[static_cast<std::size_t>(y) * w + x] = sxx * syy - sxy * sxy - kappa * tr * tr;
    }
  }
  return r;
}

double parabola_offset(double left, double centre, double right) {
  const double denom = left - 2.0 * centre + right;
  if (denom >= 0.0) return 0.0;
  return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

// Zero-mean, unit-norm luminance patch; empty when the patch is flat.
std::vector<double> normalized_patch(const std::vector<double>& lum, int w, int h, int cx, int cy,
                                     int r) {
  std::vector<double> p;
  p.reserve(static_cast<std::size_t>((2 * r + 1) * (2 * r + 1)));
  for (int y = cy - r; y <= cy + r; ++y) {
    for (int x = cx - r; x <= cx + r; ++x) {
      const int xx = std::clamp(x, 0, w - 1), yy = std::clamp(y, 0, h - 1);
      p.push_back(lum[static_cast<std::size_t>(yy) * w + xx]);
    }
  }
  const double mean = std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(p.size());
  double ss = 0.0;
  for (double& v : p) {
    v -= mean;
    ss += v * v;
  }
  if (ss < 1e-12) return {};
  const double inv = 1.0 / std::sqrt(ss);
  for (double& v : p) v *= inv;
  return p;
}

}  // namespace

void MatchConfig::validate() const {
  if (!(max_keypoints >= min_matches && min_matches >= 4)) {
    throw DomainError("match config needs max_keypoints >= min_matches >= 4");
  }
  if (patch_radius < 1) throw DomainError("patch radius must be positive");
}

double mse(const Image& a, const Image& b) {
  if (!a.same_shape(b) || a.data.size() != b.data.size()) {
    throw ShapeMismatch("mse of " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                        " and " + std::to_string(b.width) + "x" + std::to_string(b.height));
  }
  if (a.data.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.data.size());
}

double psnr(double mse_value) {
  if (std::isnan(mse_value) || mse_value < 0.0) throw DomainError("psnr of negative mse");
  if (mse_value == 0.0) return kPsnrInfinity;
  return 10.0 * std::log10(1.0 / mse_value);
}

std::vector<Keypoint> detect_keypoints(const Image& img, const MatchConfig& cfg) {
  cfg.validate();
  const int w = img.width, h = img.height;
  const int margin = std::max(cfg.patch_radius, 3);
  if (w < 2 * margin + 1 || h < 2 * margin + 1) return {};
  const std::vector<double> lum = luminance(img);
  const std::vector<double> r = harris_response(lum, w, h, cfg.harris_k);
  const auto R = [&](int x, int y) { return r[static_cast<std::size_t>(y) * w + x]; };

  struct Candidate {
    double response;
    int x, y;
  };
  std::vector<Candidate> cands;
  for (int y = margin; y < h - margin; ++y) {
    for (int x = margin; x < w - margin; ++x) {
      const double v = R(x, y);
      if (v <= kMinResponse) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const double n = R(x + dx, y + dy);
          // plateaus keep their first pixel in raster order
          const bool earlier = dy < 0 || (dy == 0 && dx < 0);
          if (earlier ? n >= v : n > v) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) cands.push_back({v, x, y});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.response != b.response) return a.response > b.response;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  if (cands.size() > static_cast<std::size_t>(cfg.max_keypoints)) cands.resize(cfg.max_keypoints);

  std::vector<Keypoint> out;
  out.reserve(cands.size());
  for (const Candidate& c : cands) {
    Keypoint kp;
    kp.position = Eigen::Vector2d(c.x + parabola_offset(R(c.x - 1, c.y), c.response, R(c.x + 1, c.y)),
                                  c.y + parabola_offset(R(c.x, c.y - 1), c.response, R(c.x, c.y + 1)));
    kp.response = c.response;
    out.push_back(kp);
  }
  return out;
}

std::vector<Match> match_keypoints(const Image& camera, const std::vector<Keypoint>& camera_kps,
                                   const Image& rendered, const std::vector<Keypoint>& rendered_kps,
                                   const MatchConfig& cfg) {
  if (!camera.same_shape(rendered)) throw ShapeMismatch("matching images differ in size");
  const int w = camera.width, h = camera.height, r = cfg.patch_radius;
  const auto lum_c = luminance(camera);
  const auto lum_r = luminance(rendered);
  const auto patches = [&](const std::vector<double>& lum, const std::vector<Keypoint>& kps) {
    std::vector<std::vector<double>> out;
    out.reserve(kps.size());
    for (const Keypoint& kp : kps) {
      out.push_back(normalized_patch(lum, w, h, static_cast<int>(std::lround(kp.position.x())),
                                     static_cast<int>(std::lround(kp.position.y())), r));
    }
    return out;
  };
  const auto pc = patches(lum_c, camera_kps);
  const auto pr = patches(lum_r, rendered_kps);

  const std::size_t nc = camera_kps.size(), nr = rendered_kps.size();
  std::vector<double> ncc(nc * nr, -2.0);
  for (std::size_t i = 0; i < nc; ++i) {
    for (std::size_t j = 0; j < nr; ++j) {
      if (pc[i].empty() || pr[j].empty()) continue;
      if ((camera_kps[i].position - rendered_kps[j].position).norm() > cfg.max_displacement) continue;
      ncc[i * nr + j] = std::inner_product(pc[i].begin(), pc[i].end(), pr[j].begin(), 0.0);
    }
  }
  const auto best_in_row = [&](std::size_t i) {
    std::size_t best = nr;
    for (std::size_t j = 0; j < nr; ++j) {
      if (ncc[i * nr + j] > (best == nr ? -2.0 : ncc[i * nr + best])) best = j;
    }
    return best;
  };
  const auto best_in_col = [&](std::size_t j) {
    std::size_t best = nc;
    for (std::size_t i = 0; i < nc; ++i) {
      if (ncc[i * nr + j] > (best == nc ? -2.0 : ncc[best * nr + j])) best = i;
    }
    return best;
  };

  std::vector<Match> matches;
  for (std::size_t i = 0; i < nc; ++i) {
    const std::size_t j = best_in_row(i);
    if (j == nr || best_in_col(j) != i) continue;
    const double score = ncc[i * nr + j];
    if (score < cfg.min_ncc) continue;
    matches.push_back({camera_kps[i], rendered_kps[j], score});
  }
  return matches;
}

double matching_loss(const Image& camera, const std::vector<Keypoint>& camera_kps,
                     const Image& rendered, const MatchConfig& cfg) {
  if (!camera.same_shape(rendered)) throw ShapeMismatch("matching images differ in size");
  const auto rendered_kps = detect_keypoints(rendered, cfg);
  const auto matches = match_keypoints(camera, camera_kps, rendered, rendered_kps, cfg);
  if (matches.size() < static_cast<std::size_t>(cfg.min_matches)) {
    throw InsufficientMatches(matches.size(), static_cast<std::size_t>(cfg.min_matches));
  }
  double sum = 0.0;
  for (const Match& m : matches) sum += (m.camera.position - m.rendered.position).squaredNorm();
  return sum / static_cast<double>(matches.size());
}

double matching_loss(const Image& camera, const Image& rendered, const MatchConfig& cfg) {
  if (!camera.same_shape(rendered)) throw ShapeMismatch("matching images differ in size");
  return matching_loss(camera, detect_keypoints(camera, cfg), rendered, cfg);
}

}  // namespace nvsc
