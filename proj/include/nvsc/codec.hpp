#pragma once

// Block-DCT codec for images and signed residuals.
//
// Stream: "RDC1", mode byte (0 lossy, 1 lossless), quality byte, width and
// height as u16 little-endian, then three plane bit streams, each padded to a
// byte boundary.
//
// Lossy planes: 8x8 blocks in raster order over the edge-replicated, padded
// plane. Each block is level-shifted by 128, DCT-II transformed, quantised by
// the JPEG luminance table scaled with the JPEG quality rule and read in zigzag
// order. The DC coefficient is coded as se(DC - previous DC). AC coefficients are
// (run, level) pairs coded as ue(run + 1) followed by ue(2 (|level| - 1) + sign);
// ue(0) ends the block.
//
// Lossless planes: left-neighbour prediction (the pixel above in column 0, 128
// at the origin), differences mod 256 mapped to [-128, 127], then alternating
// ue(zero run) / nonzero-value codes until the plane is filled.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "nvsc/image.hpp"

namespace nvsc {

enum class CodecMode : std::uint8_t { lossy = 0, lossless = 1 };

struct CodecParams {
  int quality = 90;  // 1..100
  CodecMode mode = CodecMode::lossy;

  void validate() const;
};

// Three 8-bit planes of equal size.
struct PlaneSet {
  int width = 0;
  int height = 0;
  std::array<std::vector<std::uint8_t>, 3> planes;

  PlaneSet() = default;
  PlaneSet(int w, int h, std::uint8_t fill = 0);
  std::uint8_t& at(int c, int x, int y) { return planes[c][static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int c, int x, int y) const { return planes[c][static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const PlaneSet&) const = default;
};

// Signed per-sample difference, interleaved RGB like Image, values in [-1, 1].
struct ResidualPlane {
  int width = 0;
  int height = 0;
  std::vector<double> samples;

  bool operator==(const ResidualPlane&) const = default;
};

inline constexpr int kBlock = 8;
inline constexpr std::size_t kCodecHeaderBytes = 10;

// JPEG luminance table in natural (row-major) order.
extern const std::array<int, 64> kLuminanceTable;
extern const std::array<int, 64> kZigzag;  // zigzag index -> natural index

// Quantiser step per natural-order coefficient for a quality in 1..100.
std::array<int, 64> quant_table(int quality);

// q = round_half_up((r + 1) * 127.5), r_hat = q / 127.5 - 1.
PlaneSet residual_quantize(const ResidualPlane& r);
ResidualPlane residual_dequantize(const PlaneSet& planes);

// camera - rendered, per sample.
ResidualPlane residual_between(const Image& camera, const Image& rendered);

std::vector<std::uint8_t> encode(const PlaneSet& planes, const CodecParams& params);
PlaneSet decode(std::span<const std::uint8_t> bytes);

// Image quantised per channel to 8 bits (round half up), then encode().
std::vector<std::uint8_t> encode_image_direct(const Image& img, const CodecParams& params);
Image decode_image_direct(std::span<const std::uint8_t> bytes);

}  // namespace nvsc
