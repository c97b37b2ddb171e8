#include "encrust/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

namespace encrust {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

// FIPS-197 S-box.
constexpr std::uint8_t kSbox[256] = {
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b,
    0xfe, 0xd7, 0xab, 0x76, 0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0,
    0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0, 0xb7, 0xfd, 0x93, 0x26,
    0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2,
    0xeb, 0x27, 0xb2, 0x75, 0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0,
    0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84, 0x53, 0xd1, 0x00, 0xed,
    0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f,
    0x50, 0x3c, 0x9f, 0xa8, 0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5,
    0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2, 0xcd, 0x0c, 0x13, 0xec,
    0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee, 0xb8, 0x14,
    0xde, 0x5e, 0x0b, 0xdb, 0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c,
    0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79, 0xe7, 0xc8, 0x37, 0x6d,
    0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f,
    0x4b, 0xbd, 0x8b, 0x8a, 0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e,
    0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e, 0xe1, 0xf8, 0x98, 0x11,
    0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f,
    0xb0, 0x54, 0xbb, 0x16};

std::uint8_t xtime(std::uint8_t v) {
  return static_cast<std::uint8_t>((v << 1) ^ ((v & 0x80) ? 0x1b : 0x00));
}

void expand_key(const std::array<std::uint8_t, 16>& key,
                std::uint8_t round_keys[176]) {
  std::memcpy(round_keys, key.data(), 16);
  std::uint8_t rcon = 1;
  for (int i = 16; i < 176; i += 4) {
    std::uint8_t t0 = round_keys[i - 4];
    std::uint8_t t1 = round_keys[i - 3];
    std::uint8_t t2 = round_keys[i - 2];
    std::uint8_t t3 = round_keys[i - 1];
    if (i % 16 == 0) {
      const std::uint8_t rot = t0;
      t0 = static_cast<std::uint8_t>(kSbox[t1] ^ rcon);
      t1 = kSbox[t2];
      t2 = kSbox[t3];
      t3 = kSbox[rot];
      rcon = xtime(rcon);
    }
    round_keys[i] = static_cast<std::uint8_t>(round_keys[i - 16] ^ t0);
    round_keys[i + 1] = static_cast<std::uint8_t>(round_keys[i - 15] ^ t1);
    round_keys[i + 2] = static_cast<std::uint8_t>(round_keys[i - 14] ^ t2);
    round_keys[i + 3] = static_cast<std::uint8_t>(round_keys[i - 13] ^ t3);
  }
}

void add_round_key(std::uint8_t state[16], const std::uint8_t* rk) {
  for (int i = 0; i < 16; ++i) {
    state[i] ^= rk[i];
  }
}

void sub_bytes(std::uint8_t state[16]) {
  for (int i = 0; i < 16; ++i) {
    state[i] = kSbox[state[i]];
  }
}

// FIPS layout: state[r + 4c]; row r rotates left by r positions.
void shift_rows(std::uint8_t state[16]) {
  std::uint8_t out[16];
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      out[r + 4 * c] = state[r + 4 * ((c + r) % 4)];
    }
  }
  std::memcpy(state, out, 16);
}

void mix_columns(std::uint8_t state[16]) {
  for (int c = 0; c < 4; ++c) {
    std::uint8_t* s = state + 4 * c;
    const std::uint8_t a0 = s[0], a1 = s[1], a2 = s[2], a3 = s[3];
    const std::uint8_t all = static_cast<std::uint8_t>(a0 ^ a1 ^ a2 ^ a3);
    s[0] = static_cast<std::uint8_t>(a0 ^ all ^ xtime(a0 ^ a1));
    s[1] = static_cast<std::uint8_t>(a1 ^ all ^ xtime(a1 ^ a2));
    s[2] = static_cast<std::uint8_t>(a2 ^ all ^ xtime(a2 ^ a3));
    s[3] = static_cast<std::uint8_t>(a3 ^ all ^ xtime(a3 ^ a0));
  }
}

int average_band_size(int n, int levels) { return n >> levels; }

void pack_coeff(BitVec& bits, std::int32_t value, int width) {
  const auto u = static_cast<std::uint32_t>(value);
  for (int b = width - 1; b >= 0; --b) {
    bits.push_back((u >> b) & 1u);
  }
}

std::int32_t unpack_coeff(const BitVec& bits, std::size_t pos, int width) {
  std::uint32_t u = 0;
  for (int b = 0; b < width; ++b) {
    u = (u << 1) | bits.get(pos + static_cast<std::size_t>(b));
  }
  // sign extend
  if (u & (1u << (width - 1))) {
    u |= ~0u << width;
  }
  return static_cast<std::int32_t>(u);
}

}  // namespace

Eigen::VectorXd haar_forward(const Eigen::VectorXd& x, int levels) {
  const auto n = static_cast<int>(x.size());
  if (levels < 1 || n % (1 << levels) != 0) {
    throw std::invalid_argument("haar_forward: length not divisible by 2^levels");
  }
  Eigen::VectorXd coeffs = x;
  int span = n;
  for (int level = 0; level < levels; ++level) {
    Eigen::VectorXd work = coeffs.head(span);
    const int half = span / 2;
    for (int i = 0; i < half; ++i) {
      coeffs(i) = (work(2 * i) + work(2 * i + 1)) * kInvSqrt2;
      coeffs(half + i) = (work(2 * i) - work(2 * i + 1)) * kInvSqrt2;
    }
    span = half;
  }
  return coeffs;
}

Eigen::VectorXd haar_inverse(const Eigen::VectorXd& coeffs, int levels) {
  const auto n = static_cast<int>(coeffs.size());
  if (levels < 1 || n % (1 << levels) != 0) {
    throw std::invalid_argument("haar_inverse: length not divisible by 2^levels");
  }
  Eigen::VectorXd x = coeffs;
  for (int level = levels - 1; level >= 0; --level) {
    const int half = n >> (level + 1);
    Eigen::VectorXd work = x.head(2 * half);
    for (int i = 0; i < half; ++i) {
      x(2 * i) = (work(i) + work(half + i)) * kInvSqrt2;
      x(2 * i + 1) = (work(i) - work(half + i)) * kInvSqrt2;
    }
  }
  return x;
}

std::pair<std::vector<std::int32_t>, HaarSideInfo> haar_compress(
    const Eigen::VectorXd& x, const HaarPlan& plan) {
  const auto n = static_cast<int>(x.size());
  if (plan.kept_coeffs > n) {
    throw std::invalid_argument("haar_compress: kept_coeffs > signal length");
  }
  const int avg = average_band_size(n, plan.levels);
  if (plan.kept_coeffs < avg) {
    throw std::invalid_argument("haar_compress: budget below the average band");
  }
  const Eigen::VectorXd coeffs = haar_forward(x, plan.levels);

  // Rank detail coefficients by magnitude, ties toward lower index.
  const int details_kept = plan.kept_coeffs - avg;
  std::vector<int> order(static_cast<std::size_t>(n - avg));
  std::iota(order.begin(), order.end(), avg);
  std::stable_sort(order.begin(), order.end(), [&coeffs](int a, int b) {
    return std::abs(coeffs(a)) > std::abs(coeffs(b));
  });
  order.resize(static_cast<std::size_t>(details_kept));
  std::sort(order.begin(), order.end());

  HaarSideInfo side;
  side.kept_positions = order;
  side.signal_length = n;

  double peak = coeffs.head(avg).cwiseAbs().maxCoeff();
  for (const int idx : order) {
    peak = std::max(peak, std::abs(coeffs(idx)));
  }
  const double qmax = static_cast<double>((1 << (plan.coeff_bits - 1)) - 1);
  side.scale = peak > 0.0 ? peak / qmax : 1.0;

  std::vector<std::int32_t> quantized;
  quantized.reserve(static_cast<std::size_t>(plan.kept_coeffs));
  for (int i = 0; i < avg; ++i) {
    quantized.push_back(
        static_cast<std::int32_t>(std::round(coeffs(i) / side.scale)));
  }
  for (const int idx : order) {
    quantized.push_back(
        static_cast<std::int32_t>(std::round(coeffs(idx) / side.scale)));
  }
  return {std::move(quantized), std::move(side)};
}

Eigen::VectorXd haar_decompress(const std::vector<std::int32_t>& coeffs,
                                const HaarSideInfo& side,
                                const HaarPlan& plan) {
  const int n = side.signal_length;
  const int avg = average_band_size(n, plan.levels);
  if (coeffs.size() != static_cast<std::size_t>(avg) + side.kept_positions.size()) {
    throw std::invalid_argument("haar_decompress: malformed side info");
  }
  Eigen::VectorXd full = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < avg; ++i) {
    full(i) = coeffs[static_cast<std::size_t>(i)] * side.scale;
  }
  for (std::size_t k = 0; k < side.kept_positions.size(); ++k) {
    const int idx = side.kept_positions[k];
    if (idx < avg || idx >= n) {
      throw std::invalid_argument("haar_decompress: position out of range");
    }
    full(idx) = coeffs[static_cast<std::size_t>(avg) + k] * side.scale;
  }
  return haar_inverse(full, plan.levels);
}

BitVec hamming74_encode(const BitVec& bits) {
  if (bits.size() % 4 != 0) {
    throw std::invalid_argument("hamming74_encode: length not multiple of 4");
  }
  BitVec out;
  for (std::size_t i = 0; i < bits.size(); i += 4) {
    const bool d0 = bits.get(i), d1 = bits.get(i + 1), d2 = bits.get(i + 2),
               d3 = bits.get(i + 3);
    out.push_back(d0);
    out.push_back(d1);
    out.push_back(d2);
    out.push_back(d3);
    out.push_back(d0 ^ d1 ^ d3);
    out.push_back(d0 ^ d2 ^ d3);
    out.push_back(d1 ^ d2 ^ d3);
  }
  return out;
}

HammingDecodeResult hamming74_decode(const BitVec& bits) {
  if (bits.size() % 7 != 0) {
    throw std::invalid_argument("hamming74_decode: length not multiple of 7");
  }
  // Syndrome (s0 | s1<<1 | s2<<2) -> erroneous bit index in the codeword.
  static constexpr int kSyndromeToBit[8] = {-1, 4, 5, 0, 6, 1, 2, 3};
  HammingDecodeResult result;
  for (std::size_t i = 0; i < bits.size(); i += 7) {
    bool w[7];
    for (int b = 0; b < 7; ++b) {
      w[b] = bits.get(i + static_cast<std::size_t>(b));
    }
    const int s0 = w[4] ^ w[0] ^ w[1] ^ w[3];
    const int s1 = w[5] ^ w[0] ^ w[2] ^ w[3];
    const int s2 = w[6] ^ w[1] ^ w[2] ^ w[3];
    const int syndrome = s0 | (s1 << 1) | (s2 << 2);
    if (syndrome != 0) {
      w[kSyndromeToBit[syndrome]] ^= true;
      ++result.corrected_count;
    }
    result.bits.push_back(w[0]);
    result.bits.push_back(w[1]);
    result.bits.push_back(w[2]);
    result.bits.push_back(w[3]);
  }
  return result;
}

std::array<std::uint8_t, 16> aes128_encrypt_block(
    const std::array<std::uint8_t, 16>& key,
    const std::array<std::uint8_t, 16>& block) {
  std::uint8_t round_keys[176];
  expand_key(key, round_keys);
  std::uint8_t state[16];
  std::memcpy(state, block.data(), 16);
  add_round_key(state, round_keys);
  for (int round = 1; round <= 9; ++round) {
    sub_bytes(state);
    shift_rows(state);
    mix_columns(state);
    add_round_key(state, round_keys + 16 * round);
  }
  sub_bytes(state);
  shift_rows(state);
  add_round_key(state, round_keys + 160);
  std::array<std::uint8_t, 16> out;
  std::memcpy(out.data(), state, 16);
  return out;
}

BitVec aes_ctr_apply(const BitVec& bits, const std::array<std::uint8_t, 16>& key,
                     std::uint64_t nonce) {
  std::vector<std::uint8_t> bytes = bits.bytes();
  for (std::size_t offset = 0; offset < bytes.size(); offset += 16) {
    std::array<std::uint8_t, 16> counter{};
    const std::uint64_t index = offset / 16;
    for (int i = 0; i < 8; ++i) {
      counter[static_cast<std::size_t>(i)] =
          static_cast<std::uint8_t>(nonce >> (56 - 8 * i));
      counter[static_cast<std::size_t>(8 + i)] =
          static_cast<std::uint8_t>(index >> (56 - 8 * i));
    }
    const std::array<std::uint8_t, 16> keystream =
        aes128_encrypt_block(key, counter);
    const std::size_t chunk = std::min<std::size_t>(16, bytes.size() - offset);
    for (std::size_t i = 0; i < chunk; ++i) {
      bytes[offset + i] ^= keystream[i];
    }
  }
  BitVec out = BitVec::from_bytes(std::move(bytes));
  return out.slice(0, bits.size());
}

SoaCodec::SoaCodec(const HaarPlan& plan, const std::array<std::uint8_t, 16>& key)
    : plan_(plan), key_(key) {}

CodedBitstream SoaCodec::encode(const Eigen::VectorXd& x, std::uint64_t nonce) {
  if (!used_nonces_.insert(nonce).second) {
    throw std::runtime_error("SoaCodec: nonce reuse");
  }
  auto [coeffs, side] = haar_compress(x, plan_);
  BitVec compressed;
  for (const std::int32_t c : coeffs) {
    pack_coeff(compressed, c, plan_.coeff_bits);
  }
  BitVec encoded = hamming74_encode(compressed);
  CodedBitstream out;
  out.bits = aes_ctr_apply(encoded, key_, nonce);
  out.stage = CodecStage::encrypted;
  out.side = std::move(side);
  return out;
}

Eigen::VectorXd SoaCodec::decode(const BitVec& bits, const HaarSideInfo& side,
                                 std::uint64_t nonce) const {
  const BitVec encoded = aes_ctr_apply(bits, key_, nonce);
  const HammingDecodeResult fec = hamming74_decode(encoded);
  const std::size_t count =
      static_cast<std::size_t>(plan_.kept_coeffs);
  if (fec.bits.size() < count * static_cast<std::size_t>(plan_.coeff_bits)) {
    throw std::invalid_argument("SoaCodec::decode: stream too short");
  }
  std::vector<std::int32_t> coeffs(count);
  for (std::size_t i = 0; i < count; ++i) {
    coeffs[i] = unpack_coeff(fec.bits, i * static_cast<std::size_t>(plan_.coeff_bits),
                             plan_.coeff_bits);
  }
  return haar_decompress(coeffs, side, plan_);
}

}  // namespace encrust
