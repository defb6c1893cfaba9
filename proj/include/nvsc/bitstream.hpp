#pragma once

// MSB-first bit packing with Exp-Golomb codes.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace nvsc {

class BitWriter {
 public:
  explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}
  ~BitWriter() { align(); }

  void put_bit(bool b);
  void put_bits(std::uint64_t value, int count);
  // Unsigned Exp-Golomb: v + 1 in binary, preceded by (bit length - 1) zeros.
  void put_ue(std::uint64_t v);
  // Signed Exp-Golomb: v > 0 -> 2v - 1, v <= 0 -> -2v.
  void put_se(std::int64_t v);
  // Pads with zero bits to the next byte boundary.
  void align();

 private:
  std::vector<std::uint8_t>& out_;
  std::uint8_t cur_ = 0;
  int used_ = 0;
};

// Reads from a span; every read past the end throws CodecParseError with the
// byte offset relative to `base_offset`.
class BitReader {
 public:
  BitReader(std::span<const std::uint8_t> bytes, std::size_t base_offset = 0)
      : bytes_(bytes), base_(base_offset) {}

  bool get_bit();
  std::uint64_t get_bits(int count);
  std::uint64_t get_ue();
  std::int64_t get_se();
  void align();
  std::size_t byte_position() const { return (bit_ + 7) / 8; }
  std::size_t absolute_offset() const { return base_ + bit_ / 8; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t base_;
  std::size_t bit_ = 0;
};

}  // namespace nvsc
