#include "nvsc/bitstream.hpp"

#include <bit>

#include "nvsc/errors.hpp"

namespace nvsc {

void BitWriter::put_bit(bool b) {
  cur_ = static_cast<std::uint8_t>((cur_ << 1) | (b ? 1 : 0));
  if (++used_ == 8) {
    out_.push_back(cur_);
    cur_ = 0;
    used_ = 0;
  }
}

void BitWriter::put_bits(std::uint64_t value, int count) {
  for (int i = count - 1; i >= 0; --i) put_bit((value >> i) & 1u);
}

void BitWriter::put_ue(std::uint64_t v) {
  const std::uint64_t x = v + 1;
  const int len = std::bit_width(x);
  put_bits(0, len - 1);
  put_bits(x, len);
}

void BitWriter::put_se(std::int64_t v) {
  put_ue(v > 0 ? static_cast<std::uint64_t>(2 * v - 1) : static_cast<std::uint64_t>(-2 * v));
}

void BitWriter::align() {
  if (used_ == 0) return;
  out_.push_back(static_cast<std::uint8_t>(cur_ << (8 - used_)));
  cur_ = 0;
  used_ = 0;
}

bool BitReader::get_bit() {
  const std::size_t byte = bit_ / 8;
  if (byte >= bytes_.size()) throw CodecParseError("bit stream exhausted", base_ + byte);
  const bool b = (bytes_[byte] >> (7 - bit_ % 8)) & 1u;
  ++bit_;
  return b;
}

std::uint64_t BitReader::get_bits(int count) {
  std::uint64_t v = 0;
  for (int i = 0; i < count; ++i) v = (v << 1) | (get_bit() ? 1u : 0u);
  return v;
}

std::uint64_t BitReader::get_ue() {
  const std::size_t start = base_ + bit_ / 8;
  int zeros = 0;
  while (!get_bit()) {
    if (++zeros > 40) throw CodecParseError("Exp-Golomb prefix too long", start);
  }
  const std::uint64_t rest = get_bits(zeros);
  return ((std::uint64_t{1} << zeros) | rest) - 1;
}

std::int64_t BitReader::get_se() {
  const std::uint64_t u = get_ue();
  if (u & 1u) return static_cast<std::int64_t>((u + 1) / 2);
  return -static_cast<std::int64_t>(u / 2);
}

void BitReader::align() { bit_ = (bit_ + 7) / 8 * 8; }

}  // namespace nvsc
