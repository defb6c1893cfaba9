#include <doctest.h>

#include <cmath>
#include <sstream>

#include "nvsc/studies.hpp"

using namespace nvsc;

namespace {

StudyConfig small_config() {
  StudyConfig cfg;
  cfg.scene_count = 120;
  cfg.width = 96;
  cfg.height = 54;
  cfg.rows = 1;
  cfg.steps = 6;
  cfg.trials = 2;
  cfg.rotation_grid_deg = {0.0, 2.0};
  cfg.translation_grid_frac = {0.01};
  cfg.objectives = {Objective::mse};
  cfg.qualities = {90};
  return cfg;
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("perturbation study shape, fixed point and reproducibility") {
  const StudyConfig cfg = small_config();
  const auto rows = run_perturbation_study(cfg);
  CHECK(rows.size() == 3 * 2);
  for (const PerturbRow& r : rows) {
    if (r.magnitude == 0.0) {
      CHECK(r.psnr_db == kPsnrInfinity);
      CHECK(r.iterations == 0);
      CHECK(r.compressed_bytes == 10 + 3 * (12 * 7 * 2 / 8));
    }
    CHECK_FALSE(r.failed);
  }
  std::ostringstream a, b;
  write_perturbation_csv(rows, a);
  write_perturbation_csv(run_perturbation_study(cfg), b);
  CHECK(a.str() == b.str());
  CHECK(count_lines(a.str()) == rows.size() + 1);
}

TEST_CASE("benchmark table shape and orderings") {
  StudyConfig cfg = small_config();
  cfg.qualities = {50, 90};
  const BenchmarkResult r = run_compression_benchmark(cfg);
  CHECK(r.rows.size() == 3 * 2);
  CHECK(r.frames.size() == 3 * 2 * 6);
  for (int q : cfg.qualities) {
    const auto& invs = r.row("clean", Method::invs, q);
    const auto& direct = r.row("clean", Method::direct, q);
    CHECK(invs.mean_bytes < r.row("clean", Method::no_opt, q).mean_bytes);
    CHECK(invs.mean_bytes < direct.mean_bytes);
    CHECK(std::abs(invs.mean_psnr - direct.mean_psnr) <= 0.5);
    CHECK(invs.init_previous + invs.init_estimator == 6);
  }
  std::ostringstream csv;
  write_benchmark_csv(r, csv);
  CHECK(count_lines(csv.str()) == 7);
}

TEST_CASE("robustness: empty fragment reproduces the clean run") {
  StudyConfig cfg = small_config();
  cfg.fragment_count = 0;
  const BenchmarkResult r = run_robustness_study(cfg);
  for (Method m : {Method::direct, Method::no_opt, Method::invs}) {
    const auto& c = r.row("clean", m, 90);
    const auto& n = r.row("novel", m, 90);
    CHECK(c.mean_bytes == n.mean_bytes);
    CHECK(c.mean_psnr == n.mean_psnr);
  }
  const Scene prior = study_scene(cfg);
  CHECK(robustness_world(cfg, prior, 30).gaussians.size() == prior.gaussians.size() + 30);
}

TEST_CASE("config validation") {
  StudyConfig cfg = small_config();
  cfg.trials = 0;
  CHECK_THROWS(cfg.validate());
  cfg = small_config();
  cfg.qualities.clear();
  CHECK_THROWS(cfg.validate());
}
