#include <doctest.h>

#include <sstream>

#include "nvsc/codec.hpp"
#include "nvsc/errors.hpp"
#include "nvsc/protocol.hpp"

using namespace nvsc;

namespace {

FramePacket random_packet(Rng& rng) {
  FramePacket p;
  p.frame_id = static_cast<std::uint32_t>(rng.next());
  for (float& f : p.pose) f = static_cast<float>(rng.uniform(-3, 3));
  p.residual_present = rng.index(2) == 1;
  p.lossless = rng.index(2) == 1;
  p.residual.resize(rng.index(200));
  for (auto& b : p.residual) b = static_cast<std::uint8_t>(rng.index(256));
  return p;
}

}  // namespace

TEST_CASE("packet round trip and header size") {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const FramePacket p = random_packet(rng);
    const auto bytes = serialize_packet(p);
    CHECK(bytes.size() == 40 + p.residual.size());
    CHECK(parse_packet(bytes) == p);
  }
  FramePacket empty;
  CHECK(serialize_packet(empty).size() == 40);
}

TEST_CASE("corruption, truncation and version errors") {
  Rng rng(2);
  FramePacket p = random_packet(rng);
  p.residual.assign(16, 0xAB);
  const auto bytes = serialize_packet(p);

  auto flipped = bytes;
  flipped[45] ^= 0x10;
  CHECK_THROWS_AS(parse_packet(flipped), CorruptPacket);

  auto crc = bytes;
  crc.back() ^= 1;
  CHECK_THROWS_AS(parse_packet(crc), CorruptPacket);

  CHECK_THROWS_AS(parse_packet(std::span<const std::uint8_t>(bytes).first(30)), TruncatedPacket);
  CHECK_THROWS_AS(parse_packet(std::span<const std::uint8_t>(bytes).first(bytes.size() - 1)), TruncatedPacket);

  auto version = bytes;
  version[2] = 2;
  CHECK_THROWS_AS(parse_packet(version), UnsupportedPacket);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(parse_packet(magic), UnsupportedPacket);
}

TEST_CASE("crc32 matches the standard check value") {
  const std::string s = "123456789";
  CHECK(crc32_ieee(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())) == 0xCBF43926u);
}

TEST_CASE("decode_frame: render only, and zero residual") {
  const Box box{Vec3(-1, -1, -1), Vec3(1, 1, 1)};
  const Scene s = generate_synthetic_scene(7, 100, box, SceneStyle::scatter);
  const Intrinsics k = Intrinsics::default_for(64, 40);
  FramePacket p;
  p.pose = pose_to_wire(generate_lawnmower_trajectory(box, 2.5, 1, 3)[1]);
  const Image rendered = render(s, pose_from_wire(p.pose), k);
  CHECK(decode_frame(p, s, k) == rendered);

  // Residual bytes that are not a codec stream are never touched without the flag.
  p.residual = {1, 2, 3};
  CHECK(decode_frame(p, s, k) == rendered);
  p.residual_present = true;
  CHECK_THROWS_AS(decode_frame(p, s, k), CodecParseError);

  const Image zeros(64, 40, 0.0);
  p.residual = encode(residual_quantize(residual_between(zeros, zeros)), {90, CodecMode::lossless});
  const Image out = decode_frame(p, s, k);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    CHECK(out.data[i] == std::clamp(rendered.data[i] + (128 / 127.5 - 1.0), 0.0, 1.0));
  }
}

TEST_CASE("link simulation") {
  const std::vector<std::size_t> sizes(100, 1250);
  const LinkReport r = simulate_link(std::span<const std::size_t>(sizes), 100000.0);
  CHECK(r.frames_per_second == 10.0);
  CHECK(r.total_bytes == 125000);
  for (std::size_t i = 1; i < r.delivery_s.size(); ++i) CHECK(r.delivery_s[i] > r.delivery_s[i - 1]);

  const std::vector<double> paper(100, 1218.68);
  const LinkReport q = simulate_link(std::span<const double>(paper), 100000.0);
  CHECK(q.frames_per_second == doctest::Approx(100000.0 / (8 * 1218.68)).epsilon(1e-12));
  CHECK(q.frames_per_second == doctest::Approx(10.25).epsilon(0.005));

  const std::vector<double> sizes2{100, 200, 300};
  const LinkReport o = simulate_link(std::span<const double>(sizes2), 8000.0, 20);
  CHECK(o.total_time_s == doctest::Approx((120 + 220 + 320) / 1000.0).epsilon(1e-12));

  const LinkReport none = simulate_link(std::span<const double>(), 100000.0);
  CHECK(none.tx_time_s.empty());
  CHECK(none.total_bytes == 0);

  std::ostringstream csv;
  write_link_csv(o, csv);
  CHECK(csv.str().rfind("frame_id,bytes,tx_time_s,cumulative_s\n", 0) == 0);
  CHECK_THROWS_AS(simulate_link(std::span<const double>(sizes2), 0.0), DomainError);
}
