#pragma once

// Per-frame iNVS encoding: choose a starting pose, refine it by inverting the
// renderer, and code whatever the prior cannot explain as a residual.

#include <cstdint>
#include <optional>
#include <vector>

#include "nvsc/codec.hpp"
#include "nvsc/geometry.hpp"
#include "nvsc/image.hpp"
#include "nvsc/optimize.hpp"
#include "nvsc/protocol.hpp"
#include "nvsc/render.hpp"
#include "nvsc/scene.hpp"

namespace nvsc {

enum class EncoderMode { invs, no_opt };
enum class InitSource { previous_frame, estimator };

std::string to_string(InitSource s);

struct EncoderState {
  Scene prior;
  Intrinsics intrinsics;
  std::optional<Pose> prev_pose;
  bool prev_good = false;
  std::uint32_t frame_index = 0;
  double mse_gate = 1e-3;
  EncoderMode mode = EncoderMode::invs;
  Objective objective = Objective::mse;
  Optimizer optimizer = Optimizer::bfgs;
  OptimOptions optim;
  MatchConfig match;
  RenderOptions render;
  CodecMode codec_mode = CodecMode::lossy;

  void validate() const;
};

struct EncodeStats {
  int iterations = 0;
  int function_evals = 0;
  double residual_energy = 0;  // sum of squared residual samples
  double psnr_rendered = 0;
  double psnr_reconstructed = 0;
  std::size_t bytes_total = 0;
  double loss_initial = 0;
  double loss_final = 0;
  bool optimizer_failed = false;
};

struct FrameEncoding {
  Pose pose;
  std::vector<std::uint8_t> residual_bytes;
  InitSource init_source = InitSource::estimator;
  EncodeStats stats;
  FramePacket packet;
  std::vector<std::uint8_t> packet_bytes;
  Image reconstructed;
};

struct OdometryEstimator {
  double rot_noise_deg = 0;
  double trans_noise = 0;
  std::uint64_t seed = 0;
};

// prev_pose when the previous frame was good and its render still passes the
// gate against this camera frame, otherwise the estimator pose.
std::pair<Pose, InitSource> initialize_pose(const EncoderState& state, const Image& camera,
                                            const Pose& estimator_pose);

// Rotation by an angle in [0, rot_noise_deg] about a random axis through the
// camera centre, then a centre offset of length at most trans_noise.
Pose estimate_pose(const OdometryEstimator& est, const Pose& true_pose, std::uint64_t frame_index);

// Encodes one frame and advances state. The transmitted pose is the float32
// wire pose, and the residual is formed against the render of exactly that pose.
FrameEncoding encode_frame(EncoderState& state, const Image& camera, const Pose& estimator_pose,
                           int quality);

}  // namespace nvsc
