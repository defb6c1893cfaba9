#include "nvsc/studies.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "nvsc/codec.hpp"
#include "nvsc/errors.hpp"
#include "nvsc/protocol.hpp"
#include "nvsc/rng.hpp"

namespace nvsc {

namespace {

// Stream keys for Rng::split, one per independent use of the root seed.
constexpr std::uint64_t kStreamTrial = 0x1000;
constexpr std::uint64_t kStreamFrameNoise = 0x2000000;
constexpr std::uint64_t kStreamEstimator = 0x3000000;
constexpr std::uint64_t kStreamFragment = 0x4000000;

Image add_noise(Image img, Rng& rng, double sigma) {
  if (sigma <= 0) return img;
  for (double& v : img.data) v = std::clamp(v + sigma * rng.normal(), 0.0, 1.0);
  return img;
}

Pose snap_to_wire(const Pose& p) { return pose_from_wire(pose_to_wire(p)); }

std::string objective_name(Objective o) { return o == Objective::mse ? "mse" : "matching"; }

}  // namespace

void StudyConfig::validate() const {
  if (trials < 1) throw DomainError("trials must be at least 1");
  if (rotation_grid_deg.empty() && translation_grid_frac.empty()) {
    throw DomainError("perturbation grids are empty");
  }
  if (objectives.empty() || optimizers.empty()) throw DomainError("no objective or optimizer selected");
  if (qualities.empty()) throw DomainError("no benchmark qualities");
  for (int q : qualities) CodecParams{q, CodecMode::lossy}.validate();
  CodecParams{quality, CodecMode::lossy}.validate();
  if (scene_count < 1) throw DomainError("scene_count must be positive");
  if (!bounds.valid()) throw InvalidBounds("study bounds are degenerate");
  if (pixel_noise < 0 || estimator_rot_deg < 0 || estimator_trans < 0) {
    throw DomainError("noise levels must be non-negative");
  }
  if (fragment_count < 0) throw DomainError("fragment_count must be non-negative");
  intrinsics().validate();
  optim.validate();
}

Scene study_scene(const StudyConfig& cfg) {
  return generate_synthetic_scene(cfg.scene_seed, cfg.scene_count, cfg.bounds, cfg.scene_style);
}

std::vector<Pose> study_trajectory(const StudyConfig& cfg) {
  std::vector<Pose> poses = generate_lawnmower_trajectory(cfg.bounds, cfg.standoff, cfg.rows, cfg.steps);
  for (Pose& p : poses) p = snap_to_wire(p);
  return poses;
}

// ---- perturbation sweep -----------------------------------------------------

std::vector<PerturbRow> run_perturbation_study(const StudyConfig& cfg) {
  cfg.validate();
  const Scene scene = study_scene(cfg);
  const std::vector<Pose> traj = study_trajectory(cfg);
  const Intrinsics k = cfg.intrinsics();
  const Rng root(cfg.seed);
  const double diameter = cfg.bounds.diameter();

  struct Cell {
    PerturbKind kind;
    double magnitude;
  };
  std::vector<Cell> cells;
  for (double d : cfg.rotation_grid_deg) cells.push_back({PerturbKind::rotation, d});
  for (double f : cfg.translation_grid_frac) cells.push_back({PerturbKind::translation, f * diameter});

  // Trial t draws the same ground-truth pose, axis, sign and pixel noise in every
  // cell, so cells and objectives are paired.
  struct TrialSetup {
    Pose truth;
    Image camera;
    int axis;
    double sign;
  };
  std::map<std::pair<int, int>, TrialSetup> setups;
  auto setup_for = [&](PerturbKind kind, int trial) -> const TrialSetup& {
    const std::pair<int, int> key{static_cast<int>(kind), trial};
    auto it = setups.find(key);
    if (it != setups.end()) return it->second;
    Rng rng = root.split(kStreamTrial + 2 * static_cast<std::uint64_t>(trial) + key.first);
    TrialSetup s;
    s.truth = traj[rng.index(traj.size())];
    s.axis = static_cast<int>(rng.index(3));
    s.sign = rng.index(2) == 0 ? 1.0 : -1.0;
    s.camera = add_noise(render(scene, s.truth, k), rng, cfg.pixel_noise);
    return setups.emplace(key, std::move(s)).first->second;
  };

  std::vector<PerturbRow> rows;
  for (const Cell& cell : cells) {
    for (int trial = 0; trial < cfg.trials; ++trial) {
      const TrialSetup& s = setup_for(cell.kind, trial);
      const Pose init = cell.magnitude == 0.0
                            ? s.truth
                            : apply_perturbation(s.truth, {cell.kind, s.axis, s.sign * cell.magnitude});
      for (Objective obj : cfg.objectives) {
        for (Optimizer opt : cfg.optimizers) {
          PerturbRow row{cell.kind, cell.magnitude, trial, obj, opt, 0, 0, 0, 0, false};
          try {
            EncoderState st;
            st.prior = scene;
            st.intrinsics = k;
            st.objective = obj;
            st.optimizer = opt;
            st.optim = cfg.optim;
            const FrameEncoding enc = encode_frame(st, s.camera, init, cfg.quality);
            row.psnr_db = enc.stats.psnr_rendered;
            row.residual_energy = enc.stats.residual_energy;
            row.compressed_bytes = enc.residual_bytes.size();
            row.iterations = enc.stats.iterations;
            row.failed = enc.stats.optimizer_failed;
          } catch (const std::exception&) {
            row.failed = true;
            row.psnr_db = std::nan("");
            row.residual_energy = std::nan("");
          }
          rows.push_back(row);
        }
      }
    }
  }
  return rows;
}

void write_perturbation_csv(const std::vector<PerturbRow>& rows, std::ostream& out) {
  out << "axis_kind,magnitude,trial,objective,optimizer,psnr_db,residual_energy,compressed_bytes,"
         "iterations,failed\n";
  const auto old = out.precision(10);
  for (const PerturbRow& r : rows) {
    out << (r.kind == PerturbKind::rotation ? "rotation" : "translation") << ',' << r.magnitude << ','
        << r.trial << ',' << objective_name(r.objective) << ',' << to_string(r.optimizer) << ','
        << r.psnr_db << ',' << r.residual_energy << ',' << r.compressed_bytes << ',' << r.iterations
        << ',' << (r.failed ? 1 : 0) << '\n';
  }
  out.precision(old);
}

// ---- compression benchmark --------------------------------------------------

std::string to_string(Method m) {
  switch (m) {
    case Method::direct: return "direct";
    case Method::no_opt: return "no_opt";
    case Method::invs: return "invs";
  }
  return "?";
}

double mean_psnr(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double sum = 0;
  for (double v : values) sum += std::isinf(v) ? kPsnrCap : v;
  return sum / static_cast<double>(values.size());
}

const BenchmarkRow& BenchmarkResult::row(const std::string& scenario, Method m, int quality) const {
  for (const BenchmarkRow& r : rows) {
    if (r.scenario == scenario && r.method == m && r.quality == quality) return r;
  }
  throw DomainError("no benchmark row for " + scenario + "/" + to_string(m) + "/" + std::to_string(quality));
}

Scene robustness_world(const StudyConfig& cfg, const Scene& prior, int fragment_count) {
  if (fragment_count == 0) return prior;
  const Rng root(cfg.seed);
  const Vec3 c = cfg.bounds.center();
  const Vec3 e = cfg.bounds.extent();
  const Scene fragment = make_bar_fragment(root.split(kStreamFragment).next(), fragment_count,
                                           0.6 * e.z(), 0.04 * e.x());
  // Upright bar between the survey path and the scene, in view along the sweep.
  Pose placement;
  placement.rotation = so3_exp(Vec3(0, 0, 0.3));
  placement.translation = Vec3(c.x() + 0.1 * e.x(), cfg.bounds.min.y() - 0.2 * cfg.standoff, c.z());
  return add_novel_object(prior, fragment, placement);
}

BenchmarkResult run_sequence_benchmark(const StudyConfig& cfg, const std::string& scenario,
                                       const Scene& prior, const Scene& world) {
  cfg.validate();
  const std::vector<Pose> traj = study_trajectory(cfg);
  const Intrinsics k = cfg.intrinsics();
  const Rng root(cfg.seed);
  const double raw_bytes = 3.0 * k.width * k.height;

  std::vector<Image> cameras;
  std::vector<Pose> estimates;
  const OdometryEstimator est{cfg.estimator_rot_deg, cfg.estimator_trans, root.split(kStreamEstimator).next()};
  for (std::size_t i = 0; i < traj.size(); ++i) {
    Rng noise = root.split(kStreamFrameNoise + i);
    cameras.push_back(add_noise(render(world, traj[i], k), noise, cfg.pixel_noise));
    estimates.push_back(estimate_pose(est, traj[i], i));
  }

  BenchmarkResult out;
  auto summarize = [&](Method m, int quality, int codec_quality, const std::vector<FrameRecord>& recs) {
    BenchmarkRow row{scenario, m, quality, codec_quality, 0, 0, 0};
    std::vector<double> ps;
    double bytes = 0;
    for (const FrameRecord& f : recs) {
      bytes += static_cast<double>(f.bytes);
      ps.push_back(f.psnr_db);
      if (m == Method::invs) {
        (f.init_source == InitSource::previous_frame ? row.init_previous : row.init_estimator)++;
      }
    }
    row.mean_bytes = bytes / static_cast<double>(recs.size());
    row.mean_psnr = mean_psnr(ps);
    row.compression_ratio = raw_bytes / row.mean_bytes;
    out.rows.push_back(row);
    out.frames.insert(out.frames.end(), recs.begin(), recs.end());
    return row;
  };

  auto run_encoder = [&](EncoderMode mode, int quality) {
    EncoderState st;
    st.prior = prior;
    st.intrinsics = k;
    st.mode = mode;
    st.objective = cfg.objectives.front();
    st.optimizer = cfg.optimizers.front();
    st.optim = cfg.optim;
    std::vector<FrameRecord> recs;
    for (std::size_t i = 0; i < traj.size(); ++i) {
      const FrameEncoding enc = encode_frame(st, cameras[i], estimates[i], quality);
      recs.push_back({scenario, mode == EncoderMode::invs ? Method::invs : Method::no_opt, quality,
                      quality, static_cast<int>(i), enc.stats.bytes_total, enc.stats.psnr_reconstructed,
                      enc.stats.iterations, enc.init_source, enc.stats.optimizer_failed});
    }
    return recs;
  };

  std::map<int, std::vector<FrameRecord>> direct_cache;
  auto run_direct = [&](int quality) -> const std::vector<FrameRecord>& {
    auto it = direct_cache.find(quality);
    if (it != direct_cache.end()) return it->second;
    std::vector<FrameRecord> recs;
    const CodecParams params{quality, CodecMode::lossy};
    for (std::size_t i = 0; i < traj.size(); ++i) {
      const std::vector<std::uint8_t> bytes = encode_image_direct(cameras[i], params);
      const double p = psnr(mse(cameras[i], decode_image_direct(bytes)));
      recs.push_back({scenario, Method::direct, 0, quality, static_cast<int>(i), bytes.size(), p});
    }
    return direct_cache.emplace(quality, std::move(recs)).first->second;
  };
  auto direct_psnr = [&](int quality) {
    std::vector<double> ps;
    for (const FrameRecord& f : run_direct(quality)) ps.push_back(f.psnr_db);
    return mean_psnr(ps);
  };

  for (int q : cfg.qualities) {
    const BenchmarkRow invs = summarize(Method::invs, q, q, run_encoder(EncoderMode::invs, q));
    summarize(Method::no_opt, q, q, run_encoder(EncoderMode::no_opt, q));

    // Smallest quality reaching the invs PSNR, then the closer of it and its
    // predecessor.
    int lo = 1, hi = 100;
    while (lo < hi) {
      const int mid = (lo + hi) / 2;
      if (direct_psnr(mid) >= invs.mean_psnr) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    int best = lo;
    if (lo > 1 && std::abs(direct_psnr(lo - 1) - invs.mean_psnr) < std::abs(direct_psnr(lo) - invs.mean_psnr)) {
      best = lo - 1;
    }
    std::vector<FrameRecord> recs = run_direct(best);
    for (FrameRecord& f : recs) f.quality = q;
    summarize(Method::direct, q, best, recs);
  }
  return out;
}

BenchmarkResult run_compression_benchmark(const StudyConfig& cfg) {
  const Scene prior = study_scene(cfg);
  return run_sequence_benchmark(cfg, "clean", prior, prior);
}

BenchmarkResult run_robustness_study(const StudyConfig& cfg) {
  const Scene prior = study_scene(cfg);
  BenchmarkResult out = run_sequence_benchmark(cfg, "clean", prior, prior);
  const BenchmarkResult novel =
      run_sequence_benchmark(cfg, "novel", prior, robustness_world(cfg, prior, cfg.fragment_count));
  out.rows.insert(out.rows.end(), novel.rows.begin(), novel.rows.end());
  out.frames.insert(out.frames.end(), novel.frames.begin(), novel.frames.end());
  return out;
}

void write_benchmark_csv(const BenchmarkResult& r, std::ostream& out) {
  out << "scenario,method,quality,codec_quality,compression_ratio,mean_bytes,mean_psnr,"
         "init_previous_frame,init_estimator\n";
  const auto old = out.precision(10);
  for (const BenchmarkRow& b : r.rows) {
    out << b.scenario << ',' << to_string(b.method) << ',' << b.quality << ',' << b.codec_quality << ','
        << b.compression_ratio << ',' << b.mean_bytes << ',' << b.mean_psnr << ',' << b.init_previous
        << ',' << b.init_estimator << '\n';
  }
  out.precision(old);
}

void write_frames_csv(const BenchmarkResult& r, std::ostream& out) {
  out << "scenario,method,quality,codec_quality,frame,bytes,psnr_db,iterations,init_source,"
         "optimizer_failed\n";
  const auto old = out.precision(10);
  for (const FrameRecord& f : r.frames) {
    out << f.scenario << ',' << to_string(f.method) << ',' << f.quality << ',' << f.codec_quality << ','
        << f.frame << ',' << f.bytes << ',' << f.psnr_db << ',' << f.iterations << ','
        << (f.method == Method::invs ? to_string(f.init_source) : std::string("-")) << ','
        << (f.optimizer_failed ? 1 : 0) << '\n';
  }
  out.precision(old);
}

}  // namespace nvsc
