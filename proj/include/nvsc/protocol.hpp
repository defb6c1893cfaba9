#pragma once

// Frame packet wire format and link accounting.
//
// Layout (little-endian):
//   "NV" | version 0x01 | frame_id u32 | pose 6 x f32 | flags u8 |
//   residual length u32 | residual bytes | CRC-32 u32
// The pose is the se(3) logarithm (omega, v) of the world-to-camera pose. The
// CRC is the IEEE 802.3 polynomial over every preceding byte.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "nvsc/geometry.hpp"
#include "nvsc/image.hpp"
#include "nvsc/render.hpp"
#include "nvsc/scene.hpp"

namespace nvsc {

inline constexpr std::uint8_t kPacketVersion = 0x01;
inline constexpr std::size_t kPacketOverheadBytes = 40;

enum PacketFlags : std::uint8_t {
  kResidualPresent = 1u << 0,
  kLossless = 1u << 1,
};

struct FramePacket {
  std::uint32_t frame_id = 0;
  std::array<float, 6> pose{};
  bool residual_present = false;
  bool lossless = false;
  std::vector<std::uint8_t> residual;

  bool operator==(const FramePacket&) const = default;
};

std::array<float, 6> pose_to_wire(const Pose& p);
Pose pose_from_wire(const std::array<float, 6>& w);

std::uint32_t crc32_ieee(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> serialize_packet(const FramePacket& p);
// Throws UnsupportedPacket, CorruptPacket or TruncatedPacket.
FramePacket parse_packet(std::span<const std::uint8_t> bytes);

// clamp(rendered + dequantised decoded residual, 0, 1). Shared by the encoder's
// local reconstruction and the decoder.
Image reconstruct(const Image& rendered, std::span<const std::uint8_t> residual_bytes);

Image decode_frame(const FramePacket& p, const Scene& prior, const Intrinsics& k,
                   const RenderOptions& opts = {});

struct LinkReport {
  std::vector<std::size_t> bytes;
  std::vector<double> tx_time_s;
  std::vector<double> delivery_s;  // cumulative
  double total_time_s = 0;
  std::uint64_t total_bytes = 0;
  double frames_per_second = 0;
};

// Serial transmission: tx_i = 8 (size_i + overhead) / bitrate.
LinkReport simulate_link(std::span<const double> packet_sizes, double bitrate_bps,
                         double per_packet_overhead = 0);
LinkReport simulate_link(std::span<const std::size_t> packet_sizes, double bitrate_bps,
                         double per_packet_overhead = 0);

// CSV: frame_id,bytes,tx_time_s,cumulative_s
void write_link_csv(const LinkReport& r, std::ostream& out);

}  // namespace nvsc
