#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "encrust/bits.hpp"
#include "encrust/l1solver.hpp"
#include "encrust/matgen.hpp"
#include "encrust/prng.hpp"

namespace encrust {

enum class Scheme { encrust, l_encrust };

struct CodecParams {
  int n = 256;  // signal block length
  int m = 96;   // compressed length
  int l = 150;  // transmitted measurement length
  int d = 15;   // sparse matrix row weight
  double c = 1.0;      // augmentation constant
  double alpha2 = 6.0; // capacity divisor, valid range [4, 6]
  Scheme scheme = Scheme::l_encrust;
  // Real weight applied to centered 16-bit mask words; 1.0 keeps the full
  // 16-bit mask range, commensurate with measurements of 11-bit inputs.
  double mask_scale = 1.0;
  // Multiplier on the stage-two residual budget derived from the
  // quantizer step and the stage-one correction.
  double stage2_eps_factor = 0.6;
  // Re-fit the recovered support by least squares to strip the l1
  // shrinkage bias before synthesising the block.
  bool debias = true;
  int shift_bits = 8;
  std::uint16_t lsb_mask = 0x00ff;
  SolverConfig solver;

  void validate() const;  // throws std::invalid_argument
};

struct KeySchedule {
  std::array<std::uint8_t, LfgGenerator::kKeyBytes> lfg_key{};
  std::uint16_t b_iv = 0xffff;  // fixed seed for the compression matrix
  std::uint16_t a_iv = 0xffff;  // fixed seed for the L-ENCRUST error matrix
  std::uint64_t block_counter = 0;
};

KeySchedule key_schedule_from_hex(const std::string& lfg_key_hex);

// Fixed all-ones-progression key for examples and configs that omit one.
KeySchedule default_key_schedule();

struct MeasurementBlock {
  std::vector<std::int16_t> q;
  double scale = 1.0;
  std::uint64_t block_id = 0;
};

struct DecodedBlock {
  Eigen::VectorXd x_hat;
  Eigen::VectorXd e_hat;
  int error_support_size = 0;
  std::optional<double> prd_vs_reference;
  std::optional<double> c_hat;  // decoded augmentation constant (L-ENCRUST)
  bool error_solver_converged = true;
  bool signal_solver_converged = true;
};

// --- stage operations ---------------------------------------------------

// Per-block max-abs scaling to signed 16-bit. All-zero input gets scale 1.
std::pair<std::vector<std::int16_t>, double> quantize16(
    const Eigen::VectorXd& y);
Eigen::VectorXd dequantize16(const std::vector<std::int16_t>& q, double scale);

// P = I - A (A^T A)^-1 A^T. Throws when a_eff is column rank deficient.
SensingMatrix projection_matrix(const SensingMatrix& a_eff);

// min |e|_1 s.t. P e = P y_rx, relaxed to an epsilon ball when the
// measurements carry quantization noise (epsilon > 0).
SolverResult estimate_error(const SensingMatrix& projection,
                            const Eigen::VectorXd& y_rx,
                            const SolverConfig& config, double epsilon = 0.0);

Eigen::VectorXd correct_measurements(const Eigen::VectorXd& y_rx,
                                     const Eigen::VectorXd& e_hat);

// min |theta|_1 s.t. A^T y_hat = A^T A B psi theta (the caller maps theta
// back through psi). epsilon, when positive, bounds the measurement-domain
// residual |y_hat - A B psi theta|_2 left by quantization and imperfect
// error correction; it is mapped into the constraint space internally.
SolverResult reconstruct_signal(const SensingMatrix& a_eff,
                                const SensingMatrix& b_eff,
                                const Eigen::VectorXd& y_hat,
                                const Eigen::MatrixXd& psi,
                                const SolverConfig& config,
                                double epsilon = 0.0);

// floor((l - m) / alpha2): gross errors recoverable per block.
int error_capacity(int l, int m, double alpha2);

// --- full pipelines -----------------------------------------------------

// Caches the fixed matrices, their projector (L-ENCRUST), and the DCT
// basis. Encoding advances the key schedule's block counter; decoding is
// const and reproduces per-block material from the block id alone, so
// blocks may be decoded concurrently.
class Codec {
 public:
  Codec(const CodecParams& params, const KeySchedule& keys);

  MeasurementBlock encode(const Eigen::VectorXd& x);
  DecodedBlock decode(const MeasurementBlock& block) const;

  // Decode from real-valued received measurements (epsilon = 0 path).
  DecodedBlock decode_real(const Eigen::VectorXd& y_rx,
                           std::uint64_t block_id) const;

  // Measurements before quantization, for linearity and attack studies.
  Eigen::VectorXd measure(const Eigen::VectorXd& x,
                          std::uint64_t block_id) const;

  // Per-block secret material, derived from (key, block_id).
  Eigen::VectorXd mask_vector(std::uint64_t block_id) const;
  std::vector<std::uint16_t> row_seeds(std::uint64_t block_id) const;

  // L-ENCRUST decode with a caller-supplied mask, for adversary studies.
  DecodedBlock decode_with_mask(const MeasurementBlock& block,
                                const Eigen::VectorXd& mask) const;

  const CodecParams& params() const { return params_; }
  std::uint64_t block_counter() const { return keys_.block_counter; }
  const SensingMatrix& compression_matrix() const { return b_; }
  const SensingMatrix& error_matrix() const { return a_fixed_; }
  Eigen::MatrixXd effective_matrix() const { return a_fixed_.m * b_.m; }

 private:
  SensingMatrix error_matrix_for_block(std::uint64_t block_id) const;
  static Eigen::VectorXd recover_coefficients(
      const SensingMatrix& a_eff, const SensingMatrix& b_eff,
      const Eigen::MatrixXd& psi_eff, const Eigen::VectorXd& y_hat,
      const CodecParams& params, double quant_step, double eps2,
      const std::vector<int>& forced, bool* converged);
  DecodedBlock decode_internal(const Eigen::VectorXd& y_rx, double quant_step,
                               std::uint64_t block_id) const;
  DecodedBlock decode_l_encrust(const Eigen::VectorXd& y_rx, double quant_step,
                                const Eigen::VectorXd& mask) const;

  CodecParams params_;
  KeySchedule keys_;
  SensingMatrix b_;        // m x n sparse compression matrix
  SensingMatrix a_fixed_;  // l x m sparse error matrix (L-ENCRUST only)
  Eigen::MatrixXd psi_;    // n x n DCT synthesis basis
  SensingMatrix p_fixed_;  // projector of [r A] is block dependent; this is
                           // unused for L-ENCRUST and absent for ENCRUST
};

// Free-function forms of the two encoders; both advance keys.block_counter.
MeasurementBlock encode_encrust(const Eigen::VectorXd& x,
                                const CodecParams& params, KeySchedule& keys);
MeasurementBlock encode_l_encrust(const Eigen::VectorXd& x,
                                  const CodecParams& params,
                                  KeySchedule& keys);
DecodedBlock decode(const MeasurementBlock& block, const CodecParams& params,
                    const KeySchedule& keys);

// --- wire format ----------------------------------------------------------

// Block framing: block_id u32 BE, scale f64 BE, sample count u32 BE, then
// count i16 BE samples.
void write_block(std::ostream& out, const MeasurementBlock& block);
std::vector<MeasurementBlock> read_blocks(std::istream& in);  // throws

// Measurement payload bits (count * 16, big-endian per sample), the part
// that traverses the noisy channel.
BitVec block_payload_bits(const MeasurementBlock& block);
std::vector<std::int16_t> payload_bits_to_samples(const BitVec& bits);

}  // namespace encrust
