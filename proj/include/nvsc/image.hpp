#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace nvsc {

// Row-major H x W x 3 intensities, nominally in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * 3 + c;
  }
  double& at(int x, int y, int c) { return data[index(x, y, c)]; }
  double at(int x, int y, int c) const { return data[index(x, y, c)]; }
  long pixel_count() const { return static_cast<long>(width) * height; }
  bool same_shape(const Image& o) const { return width == o.width && height == o.height; }
  bool operator==(const Image& o) const = default;
};

// 0.299 R + 0.587 G + 0.114 B, row-major W x H.
std::vector<double> luminance(const Image& img);

// Round-half-up to [0, 255] per channel.
std::uint8_t quantize_unit(double v);

// Binary PPM (P6, maxval 255).
std::vector<std::uint8_t> encode_ppm(const Image& img);
Image decode_ppm(const std::vector<std::uint8_t>& bytes);
void write_ppm(const Image& img, const std::string& path);
Image read_ppm(const std::string& path);

}  // namespace nvsc
