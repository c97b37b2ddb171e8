#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <set>
#include <vector>

#include "encrust/bits.hpp"

namespace encrust {

struct HaarPlan {
  int levels = 2;
  int kept_coeffs = 96;  // all average-band coefficients plus top details
  int coeff_bits = 16;
};

enum class CodecStage { compressed, fec_encoded, encrypted };

struct HaarSideInfo {
  double scale = 1.0;                // coefficient quantizer step
  std::vector<int> kept_positions;   // detail indices retained, ascending
  int signal_length = 0;
};

struct CodedBitstream {
  BitVec bits;
  CodecStage stage = CodecStage::compressed;
  HaarSideInfo side;
};

// Orthonormal single-level average/difference cascade, in place layout
// [averages | details]. Exposed for the transform tests.
Eigen::VectorXd haar_forward(const Eigen::VectorXd& x, int levels);
Eigen::VectorXd haar_inverse(const Eigen::VectorXd& coeffs, int levels);

// Keeps the whole average band and the largest-magnitude detail
// coefficients up to plan.kept_coeffs total, quantized to plan.coeff_bits.
// Throws when kept_coeffs exceeds the signal length or the average band.
std::pair<std::vector<std::int32_t>, HaarSideInfo> haar_compress(
    const Eigen::VectorXd& x, const HaarPlan& plan);
Eigen::VectorXd haar_decompress(const std::vector<std::int32_t>& coeffs,
                                const HaarSideInfo& side, const HaarPlan& plan);

// Systematic Hamming(7,4): data nibble d3..d0 followed by three parity
// bits. Input length must be a multiple of four.
BitVec hamming74_encode(const BitVec& bits);

struct HammingDecodeResult {
  BitVec bits;
  int corrected_count = 0;
};

// Syndrome decoding; corrects every single-bit error per codeword,
// miscorrects double errors the way a distance-3 code must.
HammingDecodeResult hamming74_decode(const BitVec& bits);

// AES-128 single block encrypt (FIPS-197), used by the counter mode.
std::array<std::uint8_t, 16> aes128_encrypt_block(
    const std::array<std::uint8_t, 16>& key,
    const std::array<std::uint8_t, 16>& block);

// CTR keystream xor over the bit stream (padded to bytes internally).
// Counter block = 8-byte nonce followed by a 64-bit big-endian counter.
// Involutive for a fixed (key, nonce).
BitVec aes_ctr_apply(const BitVec& bits,
                     const std::array<std::uint8_t, 16>& key,
                     std::uint64_t nonce);

// Haar -> Hamming -> AES-CTR pipeline. The codec tracks nonces and rejects
// reuse across blocks under one key.
class SoaCodec {
 public:
  SoaCodec(const HaarPlan& plan, const std::array<std::uint8_t, 16>& key);

  CodedBitstream encode(const Eigen::VectorXd& x, std::uint64_t nonce);
  Eigen::VectorXd decode(const BitVec& bits, const HaarSideInfo& side,
                         std::uint64_t nonce) const;

  const HaarPlan& plan() const { return plan_; }

 private:
  HaarPlan plan_;
  std::array<std::uint8_t, 16> key_;
  std::set<std::uint64_t> used_nonces_;
};

}  // namespace encrust
