#pragma once

// Image comparison measures: MSE, PSNR and the keypoint matching loss.

#include <limits>
#include <vector>

#include <Eigen/Core>

#include "nvsc/image.hpp"

namespace nvsc {

struct Keypoint {
  Eigen::Vector2d position;  // (x, y) pixels, sub-pixel refined
  double response = 0.0;
};

struct MatchConfig {
  int max_keypoints = 20;  // M
  int patch_radius = 5;
  int min_matches = 8;
  double harris_k = 0.04;
  // Minimum normalised cross-correlation for a pair to count as a match.
  double min_ncc = 0.6;
  // Largest accepted displacement between matched keypoints, pixels.
  double max_displacement = 40.0;

  void validate() const;
};

// Mean squared difference over all 3N samples.
double mse(const Image& a, const Image& b);

inline constexpr double kPsnrInfinity = std::numeric_limits<double>::infinity();

// 10 log10(1 / mse), peak 1. mse == 0 gives +infinity.
double psnr(double mse_value);

// Harris corners on luminance with 3x3 non-maximum suppression; strongest
// max_keypoints returned, ties broken by (row, col). Keypoints keep patch_radius
// pixels clear of the border.
std::vector<Keypoint> detect_keypoints(const Image& img, const MatchConfig& cfg);

struct Match {
  Keypoint camera;
  Keypoint rendered;
  double ncc;
};

// Mutual-best NCC matching between the two keypoint sets.
std::vector<Match> match_keypoints(const Image& camera, const std::vector<Keypoint>& camera_kps,
                                   const Image& rendered, const std::vector<Keypoint>& rendered_kps,
                                   const MatchConfig& cfg);

// Mean squared pixel distance over mutual-best matches. Throws
// InsufficientMatches below cfg.min_matches.
double matching_loss(const Image& camera, const Image& rendered, const MatchConfig& cfg);
double matching_loss(const Image& camera, const std::vector<Keypoint>& camera_kps,
                     const Image& rendered, const MatchConfig& cfg);

}  // namespace nvsc
