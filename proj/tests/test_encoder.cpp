#include <doctest.h>

#include "nvsc/codec.hpp"
#include "nvsc/encoder.hpp"
#include "nvsc/errors.hpp"
#include "nvsc/protocol.hpp"

using namespace nvsc;

namespace {

const Box kBox{Vec3(-1, -1, -1), Vec3(1, 1, 1)};
const Intrinsics kK = Intrinsics::default_for(160, 90);

EncoderState make_state() {
  EncoderState st;
  st.prior = generate_synthetic_scene(7, 200, kBox, SceneStyle::barrel_structure);
  st.intrinsics = kK;
  st.optim.max_iters = 100;
  return st;
}

Pose wire_exact(const Pose& p) { return pose_from_wire(pose_to_wire(p)); }

Pose trajectory_pose(int i) { return wire_exact(generate_lawnmower_trajectory(kBox, 2.5, 2, 10)[static_cast<std::size_t>(i)]); }

}  // namespace

TEST_CASE("initialize_pose gate") {
  EncoderState st = make_state();
  const Pose p = trajectory_pose(3);
  const Image camera = render(st.prior, p, kK);
  const Pose est = apply_perturbation(p, {PerturbKind::rotation, 1, 2.0});

  auto [none, src0] = initialize_pose(st, camera, est);
  CHECK(src0 == InitSource::estimator);

  st.prev_pose = p;
  st.prev_good = true;
  auto [prev, src1] = initialize_pose(st, camera, est);
  CHECK(src1 == InitSource::previous_frame);
  CHECK(prev.translation == p.translation);

  // A camera frame differing from the previous render by mse 2e-3 fails the gate.
  Image shifted = camera;
  for (double& v : shifted.data) v = v > 0.5 ? v - std::sqrt(2e-3) : v + std::sqrt(2e-3);
  CHECK(mse(shifted, camera) == doctest::Approx(2e-3));
  CHECK(initialize_pose(st, shifted, est).second == InitSource::estimator);

  st.prev_good = false;
  CHECK(initialize_pose(st, camera, est).second == InitSource::estimator);
}

TEST_CASE("estimate_pose bounds and determinism") {
  const Pose p = trajectory_pose(0);
  CHECK(estimate_pose({0, 0, 5}, p, 3).translation == p.translation);
  const OdometryEstimator est{2.0, 0.05, 42};
  for (std::uint64_t f = 0; f < 100; ++f) {
    const Pose e = estimate_pose(est, p, f);
    const PoseError err = pose_error(e, p);
    CHECK(err.rotation_deg <= 2.0 + 1e-9);
    CHECK(err.translation <= 0.05 + 1e-12);
    CHECK(estimate_pose(est, p, f).translation == e.translation);
  }
  CHECK(estimate_pose(est, p, 1).translation != estimate_pose(est, p, 2).translation);
}

TEST_CASE("fixed point: exact camera, exact init") {
  EncoderState st = make_state();
  const Pose p = trajectory_pose(5);
  const Image camera = render(st.prior, p, kK);
  const FrameEncoding e = encode_frame(st, camera, p, 90);
  CHECK(e.stats.iterations == 0);
  CHECK(e.stats.residual_energy == 0.0);
  CHECK(e.stats.psnr_rendered == kPsnrInfinity);
  // 20 x 12 blocks of two bits per plane plus the codec header.
  CHECK(e.residual_bytes.size() == 10 + 3 * 60);
  CHECK(e.stats.bytes_total == e.packet_bytes.size());
  CHECK(st.prev_good);
  CHECK(st.frame_index == 1);
}

TEST_CASE("2 degree init recovers the pose; no_opt costs more") {
  EncoderState st = make_state();
  const Pose p = trajectory_pose(7);
  const Image camera = render(st.prior, p, kK);
  const Pose init = apply_perturbation(p, {PerturbKind::rotation, 2, 2.0});
  const FrameEncoding e = encode_frame(st, camera, init, 90);
  CHECK(pose_error(e.pose, p).rotation_deg < 0.1);
  CHECK(e.stats.psnr_rendered > 40.0);
  CHECK(e.stats.loss_final <= e.stats.loss_initial);
  CHECK(e.init_source == InitSource::estimator);

  EncoderState base = make_state();
  base.mode = EncoderMode::no_opt;
  const FrameEncoding n = encode_frame(base, camera, init, 90);
  CHECK(n.stats.iterations == 0);
  CHECK(n.residual_bytes.size() > e.residual_bytes.size());
}

TEST_CASE("encoder and decoder reconstructions are bit identical") {
  EncoderState st = make_state();
  Rng rng(5);
  for (int i = 0; i < 6; ++i) {
    const Pose p = trajectory_pose(i);
    const Image camera = render(st.prior, p, kK);
    const FrameEncoding e = encode_frame(st, camera, perturb_pose(p, rng, 0.03, 2.0), 60);
    const FramePacket parsed = parse_packet(e.packet_bytes);
    CHECK(parsed.frame_id == static_cast<std::uint32_t>(i));
    CHECK(decode_frame(parsed, st.prior, kK) == e.reconstructed);
  }
}

TEST_CASE("encoding is deterministic") {
  const Pose p = trajectory_pose(2);
  EncoderState a = make_state(), b = make_state();
  const Image camera = render(a.prior, p, kK);
  const Pose init = apply_perturbation(p, {PerturbKind::translation, 0, 0.03});
  CHECK(encode_frame(a, camera, init, 75).packet_bytes == encode_frame(b, camera, init, 75).packet_bytes);
}

TEST_CASE("matching objective and failure fallback") {
  EncoderState st = make_state();
  st.objective = Objective::matching;
  st.optim.max_iters = 10;
  const Pose p = trajectory_pose(4);
  const Image camera = render(st.prior, p, kK);
  const FrameEncoding e = encode_frame(st, camera, apply_perturbation(p, {PerturbKind::rotation, 0, 1.0}), 90);
  CHECK(e.stats.psnr_rendered > 20.0);

  // A featureless camera frame leaves the matching objective undefined at the
  // start: the encoder keeps the initial pose and flags it.
  EncoderState flat = make_state();
  flat.objective = Objective::matching;
  const FrameEncoding f = encode_frame(flat, Image(160, 90, 0.5), p, 90);
  CHECK(f.stats.optimizer_failed);
  CHECK(pose_error(f.pose, p).rotation_deg < 1e-4);
}

TEST_CASE("preconditions") {
  EncoderState st = make_state();
  CHECK_THROWS_AS(encode_frame(st, Image(10, 10), Pose::identity(), 90), ShapeMismatch);
  st.mse_gate = 0;
  CHECK_THROWS_AS(st.validate(), DomainError);
}
