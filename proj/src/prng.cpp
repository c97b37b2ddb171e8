#include "encrust/prng.hpp"

#include <stdexcept>

namespace encrust {

Lfsr16 lfsr_new(std::uint16_t fp, std::uint16_t iv) {
  if (iv == 0) {
    throw std::invalid_argument("lfsr_new: iv must be nonzero");
  }
  return Lfsr16{fp, iv};
}

bool lfsr_step_galois(Lfsr16& state) {
  const bool msb = (state.sr & 0x8000u) != 0;
  if (msb) {
    state.sr = static_cast<std::uint16_t>((state.sr << 1) ^ state.fp);
  } else {
    state.sr = static_cast<std::uint16_t>(state.sr << 1);
  }
  return msb;
}

Alg1Step lfsr_step_alg1(Lfsr16& state) {
  const bool msb = (state.sr & 0x8000u) != 0;
  if (msb) {
    state.sr = static_cast<std::uint16_t>(state.sr ^ state.fp);
  }
  const std::uint16_t source = state.sr;
  state.sr = static_cast<std::uint16_t>(state.sr << 1);
  return Alg1Step{msb, source};
}

LfgGenerator::LfgGenerator(std::span<const std::uint8_t> key) {
  if (key.size() != kKeyBytes) {
    throw std::invalid_argument("LfgGenerator: key must be 24 bytes");
  }
  const auto word = [&key](std::size_t i) {
    return static_cast<std::uint16_t>(key[2 * i] | (key[2 * i + 1] << 8));
  };
  bool any1 = false;
  bool any2 = false;
  for (std::size_t i = 0; i < ring1_.size(); ++i) {
    ring1_[i] = word(i);
    any1 = any1 || ring1_[i] != 0;
  }
  for (std::size_t i = 0; i < ring2_.size(); ++i) {
    ring2_[i] = word(ring1_.size() + i);
    any2 = any2 || ring2_[i] != 0;
  }
  if (!any1 || !any2) {
    throw std::invalid_argument("LfgGenerator: a ring seeded all zero");
  }
}

std::uint16_t LfgGenerator::lag1(std::size_t k) const {
  return ring1_[(pos1_ + ring1_.size() - k) % ring1_.size()];
}

std::uint16_t LfgGenerator::lag2(std::size_t k) const {
  return ring2_[(pos2_ + ring2_.size() - k) % ring2_.size()];
}

std::uint16_t LfgGenerator::next() {
  const std::uint16_t l1_7 = lag1(7);
  const std::uint16_t l1_3 = lag1(3);
  const std::uint16_t l2_5 = lag2(5);
  const std::uint16_t l2_2 = lag2(2);

  const auto fb1 = static_cast<std::uint16_t>(
      (l1_7 ^ static_cast<std::uint16_t>(l2_2 << 3)) ^
      (l1_3 ^ static_cast<std::uint16_t>(l2_5 << 5)));
  const auto fb2 = static_cast<std::uint16_t>(
      (l2_5 ^ static_cast<std::uint16_t>(l1_3 << 2)) ^
      (l2_2 ^ static_cast<std::uint16_t>(l1_7 << 7)));

  // The oldest word of each ring is overwritten by its feedback value.
  ring1_[pos1_] = fb1;
  ring2_[pos2_] = fb2;
  pos1_ = (pos1_ + 1) % ring1_.size();
  pos2_ = (pos2_ + 1) % ring2_.size();

  return static_cast<std::uint16_t>(fb1 ^ fb2);
}

std::uint16_t LfgGenerator::next_nonzero() {
  std::uint16_t w = next();
  while (w == 0) {
    w = next();
  }
  return w;
}

}  // namespace encrust
