#include "nvsc/protocol.hpp"

#include <algorithm>
#include <bit>
#include <ostream>

#include <zlib.h>

#include "nvsc/codec.hpp"
#include "nvsc/errors.hpp"

namespace nvsc {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}

constexpr std::size_t kHeaderBytes = 2 + 1 + 4 + 24 + 1 + 4;

}  // namespace

std::array<float, 6> pose_to_wire(const Pose& p) {
  const Twist xi = se3_log(p);
  std::array<float, 6> w{};
  for (int i = 0; i < 6; ++i) w[i] = static_cast<float>(xi[i]);
  return w;
}

Pose pose_from_wire(const std::array<float, 6>& w) {
  Twist xi;
  for (int i = 0; i < 6; ++i) xi[i] = static_cast<double>(w[i]);
  return se3_exp(xi);
}

std::uint32_t crc32_ieee(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> serialize_packet(const FramePacket& p) {
  if (p.residual.size() >= (std::size_t{1} << 32)) throw DomainError("residual too large for a packet");
  std::vector<std::uint8_t> out;
  out.reserve(kPacketOverheadBytes + p.residual.size());
  out.push_back('N');
  out.push_back('V');
  out.push_back(kPacketVersion);
  put_u32(out, p.frame_id);
  for (float f : p.pose) put_u32(out, std::bit_cast<std::uint32_t>(f));
  std::uint8_t flags = 0;
  if (p.residual_present) flags |= kResidualPresent;
  if (p.lossless) flags |= kLossless;
  out.push_back(flags);
  put_u32(out, static_cast<std::uint32_t>(p.residual.size()));
  out.insert(out.end(), p.residual.begin(), p.residual.end());
  put_u32(out, crc32_ieee(out));
  return out;
}

FramePacket parse_packet(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 3) throw TruncatedPacket("packet shorter than its magic");
  if (bytes[0] != 'N' || bytes[1] != 'V') throw UnsupportedPacket("bad packet magic");
  if (bytes[2] != kPacketVersion) throw UnsupportedPacket("unsupported packet version " + std::to_string(bytes[2]));
  if (bytes.size() < kPacketOverheadBytes) throw TruncatedPacket("packet shorter than its header");
  const std::uint32_t len = get_u32(bytes, kHeaderBytes - 4);
  const std::size_t expected = kPacketOverheadBytes + static_cast<std::size_t>(len);
  if (bytes.size() < expected) {
    throw TruncatedPacket("packet declares " + std::to_string(len) + " residual bytes, holds " +
                          std::to_string(bytes.size() - kPacketOverheadBytes));
  }
  if (bytes.size() > expected) throw CorruptPacket("packet length field disagrees with its size");
  const std::uint32_t stored = get_u32(bytes, expected - 4);
  if (stored != crc32_ieee(bytes.first(expected - 4))) throw CorruptPacket("packet CRC mismatch");

  FramePacket p;
  p.frame_id = get_u32(bytes, 3);
  for (int i = 0; i < 6; ++i) p.pose[i] = std::bit_cast<float>(get_u32(bytes, 7 + 4 * i));
  const std::uint8_t flags = bytes[31];
  if (flags & ~(kResidualPresent | kLossless)) throw UnsupportedPacket("unknown packet flags");
  p.residual_present = flags & kResidualPresent;
  p.lossless = flags & kLossless;
  p.residual.assign(bytes.begin() + kHeaderBytes, bytes.begin() + kHeaderBytes + len);
  return p;
}

Image reconstruct(const Image& rendered, std::span<const std::uint8_t> residual_bytes) {
  const ResidualPlane r = residual_dequantize(decode(residual_bytes));
  if (r.width != rendered.width || r.height != rendered.height) {
    throw ShapeMismatch("residual dimensions do not match the rendered frame");
  }
  Image out = rendered;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = std::clamp(rendered.data[i] + r.samples[i], 0.0, 1.0);
  }
  return out;
}

Image decode_frame(const FramePacket& p, const Scene& prior, const Intrinsics& k,
                   const RenderOptions& opts) {
  const Image rendered = render(prior, pose_from_wire(p.pose), k, opts);
  if (!p.residual_present) return rendered;
  return reconstruct(rendered, p.residual);
}

LinkReport simulate_link(std::span<const double> packet_sizes, double bitrate_bps,
                         double per_packet_overhead) {
  if (!(bitrate_bps > 0)) throw DomainError("bitrate must be positive");
  LinkReport r;
  // Delivery times come from the cumulative byte count rather than a running sum
  // of per-packet times, so they carry one rounding each.
  double sent = 0;
  double total = 0;
  for (double size : packet_sizes) {
    sent += size + per_packet_overhead;
    total += size;
    r.bytes.push_back(static_cast<std::size_t>(std::llround(size)));
    r.tx_time_s.push_back(8.0 * (size + per_packet_overhead) / bitrate_bps);
    r.delivery_s.push_back(8.0 * sent / bitrate_bps);
  }
  const double t = 8.0 * sent / bitrate_bps;
  r.total_time_s = t;
  r.total_bytes = static_cast<std::uint64_t>(std::llround(total));
  r.frames_per_second = t > 0 ? static_cast<double>(packet_sizes.size()) / t : 0.0;
  return r;
}

LinkReport simulate_link(std::span<const std::size_t> packet_sizes, double bitrate_bps,
                         double per_packet_overhead) {
  std::vector<double> sizes(packet_sizes.begin(), packet_sizes.end());
  return simulate_link(std::span<const double>(sizes), bitrate_bps, per_packet_overhead);
}

void write_link_csv(const LinkReport& r, std::ostream& out) {
  out << "frame_id,bytes,tx_time_s,cumulative_s\n";
  const auto old = out.precision(12);
  for (std::size_t i = 0; i < r.tx_time_s.size(); ++i) {
    out << i << ',' << r.bytes[i] << ',' << r.tx_time_s[i] << ',' << r.delivery_s[i] << '\n';
  }
  out.precision(old);
}

}  // namespace nvsc
