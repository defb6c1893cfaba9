#include "nvsc/encoder.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "nvsc/errors.hpp"
#include "nvsc/rng.hpp"

namespace nvsc {

std::string to_string(InitSource s) {
  return s == InitSource::previous_frame ? "previous_frame" : "estimator";
}

void EncoderState::validate() const {
  if (!(mse_gate > 0)) throw DomainError("mse_gate must be positive");
  if (prev_good && !prev_pose) throw DomainError("prev_good requires a previous pose");
  intrinsics.validate();
  optim.validate();
  match.validate();
}

std::pair<Pose, InitSource> initialize_pose(const EncoderState& state, const Image& camera,
                                            const Pose& estimator_pose) {
  if (state.prev_good && state.prev_pose) {
    const Image prev = render(state.prior, *state.prev_pose, state.intrinsics, state.render);
    if (mse(camera, prev) < state.mse_gate) return {*state.prev_pose, InitSource::previous_frame};
  }
  return {estimator_pose, InitSource::estimator};
}

Pose estimate_pose(const OdometryEstimator& est, const Pose& true_pose, std::uint64_t frame_index) {
  if (est.rot_noise_deg < 0 || est.trans_noise < 0) throw DomainError("negative estimator noise");
  if (est.rot_noise_deg == 0 && est.trans_noise == 0) return true_pose;
  Rng rng(Rng::mix(est.seed) ^ Rng::mix(frame_index + 0x9e37));

  auto random_unit = [&rng]() {
    Vec3 v;
    do {
      v = Vec3(rng.normal(), rng.normal(), rng.normal());
    } while (v.norm() < 1e-12);
    return Vec3(v.normalized());
  };

  const Vec3 axis = random_unit();
  const double angle = rng.uniform(0.0, est.rot_noise_deg) * std::numbers::pi / 180.0;
  const Vec3 dir = random_unit();
  const double dist = rng.uniform(0.0, est.trans_noise);

  const Eigen::Quaterniond q = (so3_exp(axis * angle) * true_pose.rotation).normalized();
  return Pose::from_center(q, true_pose.center() + dir * dist);
}

FrameEncoding encode_frame(EncoderState& state, const Image& camera, const Pose& estimator_pose,
                           int quality) {
  state.validate();
  if (camera.width != state.intrinsics.width || camera.height != state.intrinsics.height) {
    throw ShapeMismatch("camera frame does not match the intrinsics");
  }
  CodecParams codec{quality, state.codec_mode};
  codec.validate();

  FrameEncoding enc;
  Pose init = estimator_pose;
  if (state.mode == EncoderMode::invs) {
    auto [p, src] = initialize_pose(state, camera, estimator_pose);
    init = p;
    enc.init_source = src;
  }

  Pose chosen = init;
  if (state.mode == EncoderMode::invs) {
    LossOptions lo;
    lo.objective = state.objective;
    lo.match = state.match;
    lo.render = state.render;
    const ObjectiveFn f = [&](const Vector& x) -> std::pair<double, Vector> {
      const Twist xi = x;
      try {
        const LossAndGrad lg = loss_and_grad(state.prior, init, xi, camera, state.intrinsics, lo);
        return {lg.loss, Vector(lg.grad)};
      } catch (const InsufficientMatches&) {
        return {std::numeric_limits<double>::infinity(), Vector::Zero(6)};
      }
    };
    try {
      const OptimizationResult r = minimize(state.optimizer, f, Vector::Zero(6), state.optim);
      enc.stats.iterations = r.iterations;
      enc.stats.function_evals = r.function_evals;
      enc.stats.loss_final = r.loss;
      if (!r.loss_history.empty()) enc.stats.loss_initial = r.loss_history.front();
      if (std::isfinite(r.loss)) {
        chosen = pose_compose(se3_exp(Twist(r.x)), init);
      } else {
        enc.stats.optimizer_failed = true;
      }
    } catch (const NumericalFailure&) {
      enc.stats.optimizer_failed = true;
    }
  }

  enc.packet.frame_id = state.frame_index;
  enc.packet.pose = pose_to_wire(chosen);
  enc.pose = pose_from_wire(enc.packet.pose);

  const Image rendered = render(state.prior, enc.pose, state.intrinsics, state.render);
  const ResidualPlane residual = residual_between(camera, rendered);
  for (double v : residual.samples) enc.stats.residual_energy += v * v;
  enc.residual_bytes = encode(residual_quantize(residual), codec);

  enc.packet.residual_present = true;
  enc.packet.lossless = state.codec_mode == CodecMode::lossless;
  enc.packet.residual = enc.residual_bytes;
  enc.packet_bytes = serialize_packet(enc.packet);

  const double render_mse = mse(camera, rendered);
  enc.reconstructed = reconstruct(rendered, enc.residual_bytes);
  enc.stats.psnr_rendered = psnr(render_mse);
  enc.stats.psnr_reconstructed = psnr(mse(camera, enc.reconstructed));
  enc.stats.bytes_total = enc.packet_bytes.size();

  state.prev_pose = enc.pose;
  state.prev_good = render_mse < state.mse_gate;
  ++state.frame_index;
  return enc;
}

}  // namespace nvsc
