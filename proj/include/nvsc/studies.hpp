#pragma once

// Desk-scale evaluation studies on synthetic scenes: perturbation sweeps, the
// compression benchmark, and novel-object robustness. Every study is a pure
// function of its configuration; all randomness derives from `seed`.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nvsc/encoder.hpp"
#include "nvsc/geometry.hpp"
#include "nvsc/optimize.hpp"
#include "nvsc/render.hpp"
#include "nvsc/scene.hpp"

namespace nvsc {

struct StudyConfig {
  std::uint64_t seed = 1;
  std::uint64_t scene_seed = 7;
  int scene_count = 200;
  SceneStyle scene_style = SceneStyle::barrel_structure;
  Box bounds{Vec3(-1, -1, -1), Vec3(1, 1, 1)};
  int width = 160;
  int height = 90;

  double standoff = 2.5;
  int rows = 4;
  int steps = 25;

  // Perturbation grids: rotation in degrees, translation as fractions of the
  // scene diameter.
  std::vector<double> rotation_grid_deg{2, 5, 10, 15, 20, 25, 32.5, 40};
  std::vector<double> translation_grid_frac{0.005, 0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.3};
  int trials = 25;
  std::vector<Objective> objectives{Objective::mse, Objective::matching};
  std::vector<Optimizer> optimizers{Optimizer::bfgs};

  int quality = 90;                 // perturbation study codec quality
  std::vector<int> qualities{50, 90};  // benchmark qualities
  double estimator_rot_deg = 2.0;
  double estimator_trans = 0.0;
  // Gaussian pixel noise added to every camera frame (0 disables).
  double pixel_noise = 0.0;
  OptimOptions optim{.max_iters = 100};

  int fragment_count = 30;

  void validate() const;
  Intrinsics intrinsics() const { return Intrinsics::default_for(width, height); }
};

// The prior scene and the trajectory poses, snapped to wire precision so that an
// unperturbed initialisation is an exact fixed point of the encoder.
Scene study_scene(const StudyConfig& cfg);
std::vector<Pose> study_trajectory(const StudyConfig& cfg);

// ---- perturbation sweep -----------------------------------------------------

struct PerturbRow {
  PerturbKind kind;
  double magnitude;  // degrees or scene units
  int trial;
  Objective objective;
  Optimizer optimizer;
  double psnr_db;
  double residual_energy;
  std::size_t compressed_bytes;  // residual codec bytes
  int iterations;
  bool failed = false;
};

std::vector<PerturbRow> run_perturbation_study(const StudyConfig& cfg);
void write_perturbation_csv(const std::vector<PerturbRow>& rows, std::ostream& out);

// ---- compression benchmark --------------------------------------------------

enum class Method { direct, no_opt, invs };
std::string to_string(Method m);

struct FrameRecord {
  std::string scenario;
  Method method;
  int quality;       // requested quality
  int codec_quality; // quality actually used (direct: matched by search)
  int frame;
  std::size_t bytes;
  double psnr_db;
  int iterations = 0;
  InitSource init_source = InitSource::estimator;
  bool optimizer_failed = false;
};

struct BenchmarkRow {
  std::string scenario;
  Method method;
  int quality;
  int codec_quality;
  double compression_ratio;
  double mean_bytes;
  double mean_psnr;
  // invs only
  int init_previous = 0;
  int init_estimator = 0;
};

struct BenchmarkResult {
  std::vector<BenchmarkRow> rows;
  std::vector<FrameRecord> frames;

  const BenchmarkRow& row(const std::string& scenario, Method m, int quality) const;
};

// Per quality: invs and no_opt at that quality, direct at the quality whose mean
// PSNR is closest to invs's (integer search over 1..100).
BenchmarkResult run_compression_benchmark(const StudyConfig& cfg);

// Clean scenario plus a "novel" scenario whose camera frames include a bar
// fragment the encoder's prior lacks. Same trajectory, same schema.
BenchmarkResult run_robustness_study(const StudyConfig& cfg);

// Shared by both studies. `world` renders the camera frames; `prior` is what the
// encoder and decoder know.
BenchmarkResult run_sequence_benchmark(const StudyConfig& cfg, const std::string& scenario,
                                       const Scene& prior, const Scene& world);

// The fragment and its placement used by the robustness study.
Scene robustness_world(const StudyConfig& cfg, const Scene& prior, int fragment_count);

void write_benchmark_csv(const BenchmarkResult& r, std::ostream& out);
void write_frames_csv(const BenchmarkResult& r, std::ostream& out);

// Mean of per-frame PSNR values; infinite entries count as kPsnrCap.
inline constexpr double kPsnrCap = 100.0;
double mean_psnr(const std::vector<double>& values);

}  // namespace nvsc
