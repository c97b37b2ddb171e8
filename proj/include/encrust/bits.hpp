#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace encrust {

// MSB-first bit vector over a byte buffer. Bit i of the stream lives in
// byte i/8 at mask 0x80 >> (i%8).
class BitVec {
 public:
  BitVec() = default;
  explicit BitVec(std::size_t nbits) : bytes_((nbits + 7) / 8), nbits_(nbits) {}

  static BitVec from_bytes(std::vector<std::uint8_t> bytes) {
    BitVec v;
    v.nbits_ = bytes.size() * 8;
    v.bytes_ = std::move(bytes);
    return v;
  }

  std::size_t size() const { return nbits_; }
  bool empty() const { return nbits_ == 0; }

  bool get(std::size_t i) const {
    return (bytes_[i / 8] >> (7 - i % 8)) & 1u;
  }

  void set(std::size_t i, bool bit) {
    const std::uint8_t mask = static_cast<std::uint8_t>(0x80u >> (i % 8));
    if (bit) {
      bytes_[i / 8] |= mask;
    } else {
      bytes_[i / 8] &= static_cast<std::uint8_t>(~mask);
    }
  }

  void push_back(bool bit) {
    if (nbits_ % 8 == 0) {
      bytes_.push_back(0);
    }
    ++nbits_;
    set(nbits_ - 1, bit);
  }

  void append(const BitVec& other) {
    for (std::size_t i = 0; i < other.size(); ++i) {
      push_back(other.get(i));
    }
  }

  BitVec slice(std::size_t begin, std::size_t count) const {
    BitVec out(count);
    for (std::size_t i = 0; i < count; ++i) {
      out.set(i, get(begin + i));
    }
    return out;
  }

  void flip(std::size_t i) { set(i, !get(i)); }

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

  // Bytes are only comparable over whole streams of equal bit length.
  friend bool operator==(const BitVec& a, const BitVec& b) {
    if (a.nbits_ != b.nbits_) {
      return false;
    }
    for (std::size_t i = 0; i < a.nbits_; ++i) {
      if (a.get(i) != b.get(i)) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t nbits_ = 0;
};

// Count of positions where the two streams differ (sizes must match).
std::size_t hamming_distance(const BitVec& a, const BitVec& b);

// CRC-16/CCITT-FALSE, the FCS polynomial family used by 802.15.4 gear.
std::uint16_t crc16_ccitt(const std::uint8_t* data, std::size_t len);

}  // namespace encrust
