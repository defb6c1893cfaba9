#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nvsc/codec.hpp"
#include "nvsc/encoder.hpp"
#include "nvsc/errors.hpp"
#include "nvsc/protocol.hpp"
#include "nvsc/render.hpp"
#include "nvsc/scene.hpp"
#include "nvsc/studies.hpp"

namespace fs = std::filesystem;
using namespace nvsc;

namespace {

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::ofstream open_csv(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream out(dir / name);
  if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
  return out;
}

Objective parse_objective(const std::string& s) {
  if (s == "mse") return Objective::mse;
  if (s == "matching") return Objective::matching;
  throw DomainError("unknown objective: " + s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Novel-view-synthesis prior image compression"};
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int quality = 90;
  std::string optimizer = "bfgs";
  std::string objective = "mse";
  int width = 160, height = 90;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Root random seed");
    cmd->add_option("--out-dir", out_dir, "Output directory");
    cmd->add_option("--quality", quality, "Codec quality 1..100")->check(CLI::Range(1, 100));
    cmd->add_option("--optimizer", optimizer, "bfgs, adam or hybrid")
        ->check(CLI::IsMember({"bfgs", "adam", "hybrid"}));
    cmd->add_option("--objective", objective, "mse or matching")->check(CLI::IsMember({"mse", "matching"}));
  };
  auto add_size = [&](CLI::App* cmd) {
    cmd->add_option("--width", width, "Frame width")->check(CLI::PositiveNumber);
    cmd->add_option("--height", height, "Frame height")->check(CLI::PositiveNumber);
  };

  // scene gen | scene render
  auto* scene_cmd = app.add_subcommand("scene", "Synthetic scene tools");
  scene_cmd->require_subcommand(1);
  auto* gen = scene_cmd->add_subcommand("gen", "Generate a synthetic scene file");
  int count = 200;
  std::string style = "barrel-structure";
  std::string scene_path = "scene.gsc";
  add_common(gen);
  gen->add_option("--count", count, "Number of Gaussians")->check(CLI::PositiveNumber);
  gen->add_option("--style", style, "scatter, lattice or barrel-structure");
  gen->add_option("--out", scene_path, "Scene file to write");

  auto* rnd = scene_cmd->add_subcommand("render", "Render a scene from a pose to PPM");
  std::string pose_text;
  std::string image_path = "frame.ppm";
  rnd->add_option("--scene", scene_path, "Scene file")->required();
  rnd->add_option("--pose", pose_text, "\"qw qx qy qz tx ty tz\" (world to camera)")->required();
  rnd->add_option("--out", image_path, "PPM to write");
  add_size(rnd);

  // study perturb | benchmark | robust
  auto* study = app.add_subcommand("study", "Run an evaluation study, writing CSV");
  study->require_subcommand(1);
  int trials = 25;
  int frames_rows = 4, frames_steps = 25;
  double pixel_noise = 0.0;
  double est_rot = 2.0;
  std::vector<int> qualities;
  auto* perturb = study->add_subcommand("perturb", "Perturbation sweep");
  auto* bench = study->add_subcommand("benchmark", "Compression benchmark");
  auto* robust = study->add_subcommand("robust", "Novel-object robustness");
  for (auto* cmd : {perturb, bench, robust}) {
    add_common(cmd);
    cmd->add_option("--pixel-noise", pixel_noise, "Camera pixel noise sigma")->check(CLI::NonNegativeNumber);
  }
  perturb->add_option("--trials", trials, "Trials per grid cell")->check(CLI::PositiveNumber);
  bool both_objectives = false;
  perturb->add_flag("--both-objectives", both_objectives, "Run mse and matching side by side");
  for (auto* cmd : {bench, robust}) {
    cmd->add_option("--rows", frames_rows, "Trajectory rows")->check(CLI::PositiveNumber);
    cmd->add_option("--steps", frames_steps, "Trajectory steps per row")->check(CLI::Range(2, 100000));
    cmd->add_option("--estimator-noise", est_rot, "Estimator rotation noise, degrees")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--qualities", qualities, "Benchmark qualities (default: --quality)");
  }

  // encode / decode
  auto* enc = app.add_subcommand("encode", "Encode one camera frame into a packet");
  std::string camera_path, packet_path = "frame.pkt", init_pose_text;
  std::uint32_t frame_id = 0;
  add_common(enc);
  enc->add_option("--scene", scene_path, "Prior scene file")->required();
  enc->add_option("--camera", camera_path, "Camera frame (PPM)")->required();
  enc->add_option("--init-pose", init_pose_text, "Initial pose \"qw qx qy qz tx ty tz\"")->required();
  enc->add_option("--frame-id", frame_id, "Frame id written to the packet");
  enc->add_option("--out", packet_path, "Packet file to write");

  auto* dec = app.add_subcommand("decode", "Decode a packet to PPM");
  dec->add_option("--scene", scene_path, "Prior scene file")->required();
  dec->add_option("--packet", packet_path, "Packet file")->required();
  dec->add_option("--out", image_path, "PPM to write");
  add_size(dec);

  // link sim
  auto* link = app.add_subcommand("link", "Link budget tools");
  link->require_subcommand(1);
  auto* sim = link->add_subcommand("sim", "Simulate serial transmission of packets");
  std::vector<double> sizes;
  std::vector<std::string> packet_files;
  double bitrate = 100000.0, overhead = 0.0;
  sim->add_option("--bytes", sizes, "Packet sizes in bytes");
  sim->add_option("--packets", packet_files, "Packet files whose sizes to use");
  sim->add_option("--bitrate", bitrate, "Link rate, bits per second")->check(CLI::PositiveNumber);
  sim->add_option("--overhead", overhead, "Per-packet overhead bytes")->check(CLI::NonNegativeNumber);
  sim->add_option("--out-dir", out_dir, "Directory for link.csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const StudyConfig defaults;
      const Scene s = generate_synthetic_scene(seed, count, defaults.bounds, parse_scene_style(style));
      save_scene_file(s, scene_path);
      std::cout << "wrote " << scene_path << " (" << s.gaussians.size() << " gaussians)\n";
    } else if (rnd->parsed()) {
      const Scene s = load_scene_file(scene_path);
      write_ppm(render(s, parse_pose(pose_text), Intrinsics::default_for(width, height)), image_path);
      std::cout << "wrote " << image_path << "\n";
    } else if (study->parsed()) {
      StudyConfig cfg;
      cfg.seed = seed;
      cfg.quality = quality;
      cfg.qualities = qualities.empty() ? std::vector<int>{quality} : qualities;
      cfg.optimizers = {parse_optimizer(optimizer)};
      cfg.objectives = {parse_objective(objective)};
      cfg.pixel_noise = pixel_noise;
      cfg.trials = trials;
      cfg.rows = frames_rows;
      cfg.steps = frames_steps;
      cfg.estimator_rot_deg = est_rot;
      const fs::path dir(out_dir);
      if (perturb->parsed()) {
        if (both_objectives) cfg.objectives = {Objective::mse, Objective::matching};
        auto out = open_csv(dir, "perturbation.csv");
        write_perturbation_csv(run_perturbation_study(cfg), out);
        std::cout << "wrote " << (dir / "perturbation.csv").string() << "\n";
      } else {
        const bool is_bench = bench->parsed();
        const BenchmarkResult r = is_bench ? run_compression_benchmark(cfg) : run_robustness_study(cfg);
        const std::string stem = is_bench ? "benchmark" : "robustness";
        auto table = open_csv(dir, stem + ".csv");
        write_benchmark_csv(r, table);
        auto frames = open_csv(dir, stem + "_frames.csv");
        write_frames_csv(r, frames);
        write_benchmark_csv(r, std::cout);
      }
    } else if (enc->parsed()) {
      EncoderState st;
      st.prior = load_scene_file(scene_path);
      const Image camera = read_ppm(camera_path);
      st.intrinsics = Intrinsics::default_for(camera.width, camera.height);
      st.objective = parse_objective(objective);
      st.optimizer = parse_optimizer(optimizer);
      st.frame_index = frame_id;
      const FrameEncoding e = encode_frame(st, camera, parse_pose(init_pose_text), quality);
      write_bytes(packet_path, e.packet_bytes);
      fs::create_directories(out_dir);
      write_ppm(e.reconstructed, (fs::path(out_dir) / "reconstructed.ppm").string());
      std::cout << "pose " << format_pose(e.pose) << "\n"
                << "init_source " << to_string(e.init_source) << "\n"
                << "iterations " << e.stats.iterations << "\n"
                << "bytes " << e.stats.bytes_total << "\n"
                << "psnr_rendered " << e.stats.psnr_rendered << "\n"
                << "psnr_reconstructed " << e.stats.psnr_reconstructed << "\n";
    } else if (dec->parsed()) {
      const Scene prior = load_scene_file(scene_path);
      const FramePacket p = parse_packet(read_bytes(packet_path));
      write_ppm(decode_frame(p, prior, Intrinsics::default_for(width, height)), image_path);
      std::cout << "frame " << p.frame_id << " -> " << image_path << "\n";
    } else if (sim->parsed()) {
      for (const std::string& f : packet_files) sizes.push_back(static_cast<double>(fs::file_size(f)));
      if (sizes.empty()) throw DomainError("no packet sizes given (--bytes or --packets)");
      const LinkReport r = simulate_link(sizes, bitrate, overhead);
      auto out = open_csv(fs::path(out_dir), "link.csv");
      write_link_csv(r, out);
      std::cout << "packets " << sizes.size() << "\n"
                << "total_time_s " << r.total_time_s << "\n"
                << "frames_per_second " << r.frames_per_second << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
