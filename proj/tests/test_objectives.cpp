#include <doctest.h>

#include <cmath>

#include "nvsc/errors.hpp"
#include "nvsc/geometry.hpp"
#include "nvsc/objectives.hpp"
#include "nvsc/render.hpp"

using namespace nvsc;

namespace {

Image random_image(Rng& rng, int w, int h) {
  Image img(w, h);
  for (double& v : img.data) v = rng.uniform();
  return img;
}

Image checkerboard(int w, int h, int cell, int ox = 0, int oy = 0) {
  Image img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool on = (((x + ox) / cell) + ((y + oy) / cell)) % 2 == 0;
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = on ? 0.9 : 0.1;
    }
  }
  return img;
}

}  // namespace

TEST_CASE("mse closed forms, symmetry and brute-force oracle") {
  Image zeros(8, 6, 0.0), ones(8, 6, 1.0);
  CHECK(mse(zeros, zeros) == 0.0);
  CHECK(mse(zeros, ones) == 1.0);

  Rng rng(1);
  const Image a = random_image(rng, 33, 17), b = random_image(rng, 33, 17);
  double sum = 0;
  for (int y = 0; y < 17; ++y)
    for (int x = 0; x < 33; ++x)
      for (int c = 0; c < 3; ++c) sum += (a.at(x, y, c) - b.at(x, y, c)) * (a.at(x, y, c) - b.at(x, y, c));
  CHECK(std::abs(mse(a, b) - sum / (33.0 * 17 * 3)) < 1e-12);
  CHECK(mse(a, b) == mse(b, a));
  CHECK_THROWS_AS(mse(a, Image(32, 17)), ShapeMismatch);
}

TEST_CASE("psnr") {
  CHECK(psnr(1e-3) == doctest::Approx(30.0).epsilon(1e-12));
  CHECK(psnr(1.0) == 0.0);
  CHECK(psnr(0.0) == kPsnrInfinity);
  CHECK_THROWS_AS(psnr(-1e-3), DomainError);
  Rng rng(2);
  double prev = kPsnrInfinity;
  for (double m = 1e-6; m < 1.0; m *= 1.7) {
    CHECK(std::abs(psnr(m) - (-10.0 * std::log(m) / std::log(10.0))) < 1e-12);
    CHECK(psnr(m) < prev);
    prev = psnr(m);
  }
}

TEST_CASE("keypoints: constant image, single bright pixel, checkerboard corners") {
  MatchConfig cfg;
  CHECK(detect_keypoints(Image(64, 48, 0.5), cfg).empty());

  Image dot(64, 48, 0.0);
  for (int c = 0; c < 3; ++c) dot.at(30, 20, c) = 1.0;
  const auto kd = detect_keypoints(dot, cfg);
  bool found = false;
  for (const Keypoint& k : kd) found |= (k.position - Eigen::Vector2d(30, 20)).norm() <= 1.0;
  CHECK(found);

  // Cells of 12 px: interior corners sit between pixels 11|12, 23|24, ...
  const Image cb = checkerboard(96, 72, 12);
  cfg.max_keypoints = 100;
  const auto kc = detect_keypoints(cb, cfg);
  REQUIRE(kc.size() >= 10);
  for (const Keypoint& k : kc) {
    const double gx = std::round((k.position.x() + 0.5) / 12.0) * 12.0 - 0.5;
    const double gy = std::round((k.position.y() + 0.5) / 12.0) * 12.0 - 0.5;
    CHECK(std::abs(k.position.x() - gx) <= 1.0);
    CHECK(std::abs(k.position.y() - gy) <= 1.0);
    CHECK(k.position.x() >= cfg.patch_radius);
    CHECK(k.position.y() >= cfg.patch_radius);
  }
}

TEST_CASE("matching loss: identity, known shift, featureless") {
  const Box box{Vec3(-1, -1, -1), Vec3(1, 1, 1)};
  const Scene s = generate_synthetic_scene(7, 200, box, SceneStyle::barrel_structure);
  const Pose p = generate_lawnmower_trajectory(box, 2.5, 1, 5)[2];
  const Intrinsics big = Intrinsics::default_for(200, 130);
  const Image full = render(s, p, big);
  MatchConfig cfg;
  CHECK(matching_loss(full, full, cfg) == 0.0);

  // Two crops of one image offset by (3, 4): the same scene point sits 3 px
  // further right and 4 px further down in `shifted`.
  auto crop = [&](int ox, int oy) {
    Image out(160, 110);
    for (int y = 0; y < 110; ++y)
      for (int x = 0; x < 160; ++x)
        for (int c = 0; c < 3; ++c) out.at(x, y, c) = full.at(x + ox, y + oy, c);
    return out;
  };
  const Image base = crop(10, 10);
  const Image shifted = crop(7, 6);
  CHECK(matching_loss(base, shifted, cfg) == doctest::Approx(25.0).epsilon(1.0 / 25.0));

  const Image flat(64, 48, 0.3);
  CHECK_THROWS_AS(matching_loss(flat, flat, cfg), InsufficientMatches);
}

TEST_CASE("match config validation") {
  MatchConfig cfg;
  cfg.min_matches = 2;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg = MatchConfig{};
  cfg.max_keypoints = 4;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
}
