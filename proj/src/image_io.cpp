#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "nvsc/errors.hpp"
#include "nvsc/image.hpp"

namespace nvsc {

std::vector<double> luminance(const Image& img) {
  std::vector<double> out(static_cast<std::size_t>(img.pixel_count()));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.299 * img.data[3 * i] + 0.587 * img.data[3 * i + 1] + 0.114 * img.data[3 * i + 2];
  }
  return out;
}

std::uint8_t quantize_unit(double v) {
  const double s = std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
  return static_cast<std::uint8_t>(s);
}

std::vector<std::uint8_t> encode_ppm(const Image& img) {
  const std::string header =
      "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + img.data.size());
  for (double v : img.data) out.push_back(quantize_unit(v));
  return out;
}

Image decode_ppm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&] {
    skip_space();
    long v = 0;
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) v = v * 10 + (bytes[pos++] - '0');
    if (pos == start || v > 65535) throw DomainError("malformed PPM header");
    return static_cast<int>(v);
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw DomainError("not a P6 PPM");
  pos = 2;
  const int w = read_int(), h = read_int(), maxval = read_int();
  if (w < 1 || h < 1 || maxval != 255) throw DomainError("unsupported PPM dimensions or maxval");
  ++pos;  // single whitespace before raster
  Image img(w, h);
  if (bytes.size() < pos + img.data.size()) throw DomainError("truncated PPM raster");
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = bytes[pos + i] / 255.0;
  return img;
}

void write_ppm(const Image& img, const std::string& path) {
  const auto bytes = encode_ppm(img);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Image read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_ppm(bytes);
}

}  // namespace nvsc
