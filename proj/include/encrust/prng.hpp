#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace encrust {

// Feedback mask for the primitive polynomial x^16 + x^14 + x^13 + x^11 + 1
// in Galois (shift-then-xor) form. The x^16 term is implicit in the 16-bit
// register width.
inline constexpr std::uint16_t kDefaultFeedbackMask = 0x6801;

// 16-bit linear feedback shift register. The register must never be zero:
// the all-zero state is a fixed point of both step functions.
struct Lfsr16 {
  std::uint16_t fp = kDefaultFeedbackMask;  // feedback polynomial mask
  std::uint16_t sr = 0;                     // shift register
};

// Throws std::invalid_argument when iv == 0.
Lfsr16 lfsr_new(std::uint16_t fp, std::uint16_t iv);

// Galois step: test MSB, shift left, xor the mask when the MSB was set.
// Returns the tested MSB. Used by the binary matrix construction.
bool lfsr_step_galois(Lfsr16& state);

struct Alg1Step {
  bool msb_was_set;
  std::uint16_t index_source;  // register value the column index derives from
};

// Step variant used by the sparse matrix construction. Unlike the Galois
// step, the MSB-set branch xors the mask without a prior shift; the column
// index source is the post-xor register, and the left shift happens last.
Alg1Step lfsr_step_alg1(Lfsr16& state);

// Pair of lagged Fibonacci generators over 16-bit words with trinomials
// x^7 + x^3 + 1 and x^5 + x^2 + 1, cross-coupled through a nonlinear
// feedback function. Plain value state: copy to fork a stream, never share
// one instance across threads.
class LfgGenerator {
 public:
  static constexpr std::size_t kKeyBytes = 24;

  // Fills both rings from the key in little-endian word order (ring 1 gets
  // words 0..6, ring 2 words 7..11). Throws std::invalid_argument when
  // either ring would be all zero.
  explicit LfgGenerator(std::span<const std::uint8_t> key);

  // Advances both rings one position and emits fb1 ^ fb2.
  std::uint16_t next();

  // Convenience for consumers that cannot accept a zero word (LFSR seeds).
  std::uint16_t next_nonzero();

 private:
  std::uint16_t lag1(std::size_t k) const;  // word k positions back in ring 1
  std::uint16_t lag2(std::size_t k) const;

  std::array<std::uint16_t, 7> ring1_{};
  std::array<std::uint16_t, 5> ring2_{};
  std::size_t pos1_ = 0;
  std::size_t pos2_ = 0;
};

}  // namespace encrust
