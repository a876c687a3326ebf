#ifndef ECALLOC_BITIO_HPP
#define ECALLOC_BITIO_HPP

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace ecalloc {

// Little-endian bit packing: bits fill each byte starting from bit 0.
class BitWriter {
 public:
  void write_bits(uint32_t value, int nbits) {
    if (nbits < 0 || nbits > 32) throw std::invalid_argument("BitWriter: bad width");
    for (int i = 0; i < nbits; ++i) {
      if (bit_pos_ == 0) bytes_.push_back(0);
      if ((value >> i) & 1u) bytes_.back() |= static_cast<uint8_t>(1u << bit_pos_);
      bit_pos_ = (bit_pos_ + 1) & 7;
    }
    total_bits_ += nbits;
  }

  // two's complement in nbits
  void write_signed(int32_t value, int nbits) {
    write_bits(static_cast<uint32_t>(value) & (nbits >= 32 ? ~0u : ((1u << nbits) - 1u)), nbits);
  }

  const std::vector<uint8_t>& bytes() const { return bytes_; }
  size_t bit_count() const { return total_bits_; }

 private:
  std::vector<uint8_t> bytes_;
  int bit_pos_ = 0;
  size_t total_bits_ = 0;
};

class BitReader {
 public:
  explicit BitReader(const std::vector<uint8_t>& bytes) : bytes_(bytes) {}

  uint32_t read_bits(int nbits) {
    if (nbits < 0 || nbits > 32) throw std::invalid_argument("BitReader: bad width");
    uint32_t v = 0;
    for (int i = 0; i < nbits; ++i) {
      const size_t byte = pos_ >> 3;
      if (byte >= bytes_.size()) throw std::out_of_range("BitReader: past end of stream");
      if ((bytes_[byte] >> (pos_ & 7)) & 1u) v |= (1u << i);
      ++pos_;
    }
    return v;
  }

  int32_t read_signed(int nbits) {
    uint32_t v = read_bits(nbits);
    if (nbits > 0 && nbits < 32 && (v & (1u << (nbits - 1))))
      v |= ~((1u << nbits) - 1u);  // sign extend
    return static_cast<int32_t>(v);
  }

  size_t bit_position() const { return pos_; }

 private:
  const std::vector<uint8_t>& bytes_;
  size_t pos_ = 0;
};

}  // namespace ecalloc

#endif  // ECALLOC_BITIO_HPP
