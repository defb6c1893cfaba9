#include "nvsc/codec.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nvsc/bitstream.hpp"
#include "nvsc/errors.hpp"

namespace nvsc {

const std::array<int, 64> kLuminanceTable = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99};

const std::array<int, 64> kZigzag = {
    0,  1,  8,  16, 9,  2,  3,  10, 17, 24, 32, 25, 18, 11, 4,  5,   //
    12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6,  7,  14, 21, 28,  //
    35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51,  //
    58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63};

namespace {

constexpr std::uint8_t kMagic[4] = {'R', 'D', 'C', '1'};

using Block = std::array<double, 64>;

// cos((2x + 1) u pi / 16) scaled by C(u) / 2, so F = M f M^T.
const std::array<double, 64>& dct_matrix() {
  static const std::array<double, 64> m = [] {
    std::array<double, 64> out{};
    for (int u = 0; u < 8; ++u) {
      const double cu = u == 0 ? std::sqrt(0.5) : 1.0;
      for (int x = 0; x < 8; ++x) {
        out[u * 8 + x] = 0.5 * cu * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
      }
    }
    return out;
  }();
  return m;
}

Block forward_dct(const Block& f) {
  const auto& m = dct_matrix();
  Block tmp{}, out{};
  for (int u = 0; u < 8; ++u) {
    for (int x = 0; x < 8; ++x) {
      double s = 0;
      for (int y = 0; y < 8; ++y) s += m[u * 8 + y] * f[y * 8 + x];
      tmp[u * 8 + x] = s;  // rows transformed
    }
  }
  for (int u = 0; u < 8; ++u) {
    for (int v = 0; v < 8; ++v) {
      double s = 0;
      for (int x = 0; x < 8; ++x) s += tmp[u * 8 + x] * m[v * 8 + x];
      out[u * 8 + v] = s;
    }
  }
  return out;
}

Block inverse_dct(const Block& c) {
  const auto& m = dct_matrix();
  Block tmp{}, out{};
  for (int y = 0; y < 8; ++y) {
    for (int v = 0; v < 8; ++v) {
      double s = 0;
      for (int u = 0; u < 8; ++u) s += m[u * 8 + y] * c[u * 8 + v];
      tmp[y * 8 + v] = s;
    }
  }
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      double s = 0;
      for (int v = 0; v < 8; ++v) s += tmp[y * 8 + v] * m[v * 8 + x];
      out[y * 8 + x] = s;
    }
  }
  return out;
}

std::uint8_t round_to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

void encode_lossy_plane(BitWriter& bw, const std::vector<std::uint8_t>& plane, int w, int h,
                        const std::array<int, 64>& qt) {
  const int bw_blocks = (w + kBlock - 1) / kBlock;
  const int bh_blocks = (h + kBlock - 1) / kBlock;
  long prev_dc = 0;
  for (int by = 0; by < bh_blocks; ++by) {
    for (int bx = 0; bx < bw_blocks; ++bx) {
      Block f{};
      for (int y = 0; y < 8; ++y) {
        const int sy = std::min(by * 8 + y, h - 1);
        for (int x = 0; x < 8; ++x) {
          const int sx = std::min(bx * 8 + x, w - 1);
          f[y * 8 + x] = static_cast<double>(plane[static_cast<std::size_t>(sy) * w + sx]) - 128.0;
        }
      }
      const Block coef = forward_dct(f);
      std::array<long, 64> level{};
      for (int i = 0; i < 64; ++i) level[i] = std::lround(coef[kZigzag[i]] / qt[kZigzag[i]]);

      bw.put_se(level[0] - prev_dc);
      prev_dc = level[0];
      int run = 0;
      for (int i = 1; i < 64; ++i) {
        if (level[i] == 0) {
          ++run;
          continue;
        }
        bw.put_ue(static_cast<std::uint64_t>(run) + 1);
        const long mag = std::abs(level[i]);
        bw.put_ue(static_cast<std::uint64_t>(2 * (mag - 1) + (level[i] < 0 ? 1 : 0)));
        run = 0;
      }
      bw.put_ue(0);  // end of block
    }
  }
}

void decode_lossy_plane(BitReader& br, std::vector<std::uint8_t>& plane, int w, int h,
                        const std::array<int, 64>& qt) {
  const int bw_blocks = (w + kBlock - 1) / kBlock;
  const int bh_blocks = (h + kBlock - 1) / kBlock;
  long prev_dc = 0;
  for (int by = 0; by < bh_blocks; ++by) {
    for (int bx = 0; bx < bw_blocks; ++bx) {
      Block coef{};
      const std::int64_t dc_diff = br.get_se();
      const long dc = prev_dc + static_cast<long>(dc_diff);
      if (std::abs(dc) > 1L << 20) throw CodecParseError("DC coefficient out of range", br.absolute_offset());
      prev_dc = dc;
      coef[kZigzag[0]] = static_cast<double>(dc) * qt[kZigzag[0]];
      int i = 1;
      while (true) {
        const std::uint64_t sym = br.get_ue();
        if (sym == 0) break;
        const std::uint64_t run = sym - 1;
        if (run > 63 || i + static_cast<int>(run) > 63) {
          throw CodecParseError("AC run overflows block", br.absolute_offset());
        }
        i += static_cast<int>(run);
        const std::uint64_t code = br.get_ue();
        if (code > (1u << 22)) throw CodecParseError("AC level out of range", br.absolute_offset());
        const long mag = static_cast<long>(code / 2) + 1;
        const long lv = (code & 1u) ? -mag : mag;
        coef[kZigzag[i]] = static_cast<double>(lv) * qt[kZigzag[i]];
        ++i;
      }
      const Block f = inverse_dct(coef);
      for (int y = 0; y < 8; ++y) {
        const int sy = by * 8 + y;
        if (sy >= h) break;
        for (int x = 0; x < 8; ++x) {
          const int sx = bx * 8 + x;
          if (sx >= w) break;
          plane[static_cast<std::size_t>(sy) * w + sx] = round_to_byte(f[y * 8 + x] + 128.0);
        }
      }
    }
  }
}

int predict(const std::vector<std::uint8_t>& plane, int w, std::size_t i) {
  if (i == 0) return 128;
  if (i % static_cast<std::size_t>(w) == 0) return plane[i - static_cast<std::size_t>(w)];
  return plane[i - 1];
}

int wrap_signed(int d) {
  d = ((d % 256) + 256) % 256;
  return d >= 128 ? d - 256 : d;
}

void encode_lossless_plane(BitWriter& bw, const std::vector<std::uint8_t>& plane, int w) {
  const std::size_t n = plane.size();
  std::size_t i = 0;
  while (true) {
    std::size_t run = 0;
    while (i < n && wrap_signed(plane[i] - predict(plane, w, i)) == 0) {
      ++run;
      ++i;
    }
    bw.put_ue(run);
    if (i == n) break;
    const int d = wrap_signed(plane[i] - predict(plane, w, i));
    const int mag = std::abs(d);
    bw.put_ue(static_cast<std::uint64_t>(2 * (mag - 1) + (d < 0 ? 1 : 0)));
    ++i;
  }
}

void decode_lossless_plane(BitReader& br, std::vector<std::uint8_t>& plane, int w) {
  const std::size_t n = plane.size();
  std::size_t i = 0;
  while (true) {
    const std::uint64_t run = br.get_ue();
    if (run > n - i) throw CodecParseError("zero run overflows plane", br.absolute_offset());
    for (std::uint64_t r = 0; r < run; ++r, ++i) {
      plane[i] = static_cast<std::uint8_t>(predict(plane, w, i));
    }
    if (i == n) break;
    const std::uint64_t code = br.get_ue();
    if (code > 255) throw CodecParseError("lossless difference out of range", br.absolute_offset());
    const int mag = static_cast<int>(code / 2) + 1;
    const int d = (code & 1u) ? -mag : mag;
    plane[i] = static_cast<std::uint8_t>((predict(plane, w, i) + d + 256) % 256);
    ++i;
  }
}

}  // namespace

void CodecParams::validate() const {
  if (quality < 1 || quality > 100) throw DomainError("codec quality must be in 1..100");
  if (mode != CodecMode::lossy && mode != CodecMode::lossless) throw DomainError("unknown codec mode");
}

PlaneSet::PlaneSet(int w, int h, std::uint8_t fill) : width(w), height(h) {
  for (auto& p : planes) p.assign(static_cast<std::size_t>(w) * h, fill);
}

std::array<int, 64> quant_table(int quality) {
  if (quality < 1 || quality > 100) throw DomainError("codec quality must be in 1..100");
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> out{};
  for (int i = 0; i < 64; ++i) out[i] = std::clamp((kLuminanceTable[i] * scale + 50) / 100, 1, 255);
  return out;
}

PlaneSet residual_quantize(const ResidualPlane& r) {
  if (r.samples.size() != static_cast<std::size_t>(r.width) * r.height * 3) {
    throw ShapeMismatch("residual sample count does not match its dimensions");
  }
  PlaneSet out(r.width, r.height);
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    const double v = r.samples[i];
    if (!std::isfinite(v) || v < -1.0 || v > 1.0) {
      throw DomainError("residual sample " + std::to_string(v) + " outside [-1, 1]");
    }
    const double q = std::floor((v + 1.0) * 127.5 + 0.5);
    out.planes[i % 3][i / 3] = static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
  }
  return out;
}

ResidualPlane residual_dequantize(const PlaneSet& planes) {
  ResidualPlane r;
  r.width = planes.width;
  r.height = planes.height;
  const std::size_t n = static_cast<std::size_t>(planes.width) * planes.height;
  r.samples.resize(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) r.samples[i * 3 + c] = planes.planes[c][i] / 127.5 - 1.0;
  }
  return r;
}

ResidualPlane residual_between(const Image& camera, const Image& rendered) {
  if (!camera.same_shape(rendered)) throw ShapeMismatch("residual of differently sized images");
  ResidualPlane r;
  r.width = camera.width;
  r.height = camera.height;
  r.samples.resize(camera.data.size());
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    r.samples[i] = std::clamp(camera.data[i] - rendered.data[i], -1.0, 1.0);
  }
  return r;
}

std::vector<std::uint8_t> encode(const PlaneSet& planes, const CodecParams& params) {
  params.validate();
  if (planes.width < 1 || planes.height < 1 || planes.width > 65535 || planes.height > 65535) {
    throw DomainError("codec dimensions must be in 1..65535");
  }
  const std::size_t n = static_cast<std::size_t>(planes.width) * planes.height;
  for (const auto& p : planes.planes) {
    if (p.size() != n) throw ShapeMismatch("plane size does not match dimensions");
  }
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.push_back(static_cast<std::uint8_t>(params.mode));
  out.push_back(static_cast<std::uint8_t>(params.quality));
  out.push_back(static_cast<std::uint8_t>(planes.width & 0xff));
  out.push_back(static_cast<std::uint8_t>(planes.width >> 8));
  out.push_back(static_cast<std::uint8_t>(planes.height & 0xff));
  out.push_back(static_cast<std::uint8_t>(planes.height >> 8));

  const auto qt = quant_table(params.quality);
  for (const auto& p : planes.planes) {
    BitWriter bw(out);
    if (params.mode == CodecMode::lossy) {
      encode_lossy_plane(bw, p, planes.width, planes.height, qt);
    } else {
      encode_lossless_plane(bw, p, planes.width);
    }
  }
  return out;
}

PlaneSet decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kCodecHeaderBytes) throw CodecParseError("stream shorter than header", bytes.size());
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw CodecParseError("bad codec magic", 0);
  }
  const std::uint8_t mode = bytes[4];
  if (mode > 1) throw CodecParseError("unknown codec mode", 4);
  const int quality = bytes[5];
  if (quality < 1 || quality > 100) throw CodecParseError("quality out of range", 5);
  const int w = bytes[6] | (bytes[7] << 8);
  const int h = bytes[8] | (bytes[9] << 8);
  if (w < 1 || h < 1) throw CodecParseError("zero image dimension", 6);

  PlaneSet out(w, h);
  const auto qt = quant_table(quality);
  std::size_t offset = kCodecHeaderBytes;
  for (auto& p : out.planes) {
    BitReader br(bytes.subspan(offset), offset);
    if (mode == 0) {
      decode_lossy_plane(br, p, w, h, qt);
    } else {
      decode_lossless_plane(br, p, w);
    }
    br.align();
    offset += br.byte_position();
  }
  if (offset != bytes.size()) throw CodecParseError("trailing bytes after last plane", offset);
  return out;
}

std::vector<std::uint8_t> encode_image_direct(const Image& img, const CodecParams& params) {
  PlaneSet planes(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) planes.planes[i % 3][i / 3] = quantize_unit(img.data[i]);
  return encode(planes, params);
}

Image decode_image_direct(std::span<const std::uint8_t> bytes) {
  const PlaneSet planes = decode(bytes);
  Image img(planes.width, planes.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = planes.planes[i % 3][i / 3] / 255.0;
  return img;
}

}  // namespace nvsc
