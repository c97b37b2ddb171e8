#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "encrust/prng.hpp"

namespace encrust {

enum class MatrixKind { binary, sparse, augmented, projection, product };

// Dense-backed sensing matrix with a provenance tag. The sizes in play
// (at most a few hundred rows/columns) make dense storage the right call;
// the row-sparse view only matters for the dump format.
struct SensingMatrix {
  Eigen::MatrixXd m;
  MatrixKind kind = MatrixKind::sparse;
  int row_weight = 0;  // d for sparse kind, 0 otherwise

  Eigen::Index rows() const { return m.rows(); }
  Eigen::Index cols() const { return m.cols(); }
};

struct CoherenceReport {
  double mu = 0.0;
  int d = 0;
  double reference_lo = 0.0;
  double reference_hi = 0.0;
};

// Row-sparse construction: each row accumulates d signed unit increments at
// LFSR-derived column indices (collisions add up, so a row can have fewer
// than d distinct nonzeros). The column index is (src >> shift_bits) ^
// (src & lsb_mask), reduced modulo cols when cols < 256.
SensingMatrix build_sparse_matrix(std::uint16_t iv, std::uint16_t fp,
                                  int shift_bits, std::uint16_t lsb_mask,
                                  int d, int rows, int cols);

// Paper parameterisation: shift_bits = 8, lsb_mask = 0x00ff.
SensingMatrix build_sparse_matrix(std::uint16_t iv, std::uint16_t fp, int d,
                                  int rows, int cols);

// +/-1 matrix from the Galois LFSR, re-seeding the register with iv at the
// start of every row (the literal outer loop, so all rows repeat).
SensingMatrix build_binary_matrix(std::uint16_t iv, std::uint16_t fp, int rows,
                                  int cols);

// One seed per row; this is the form the encoder uses, with row seeds drawn
// from the keyed word generator so rows are distinct.
SensingMatrix build_binary_matrix(std::span<const std::uint16_t> row_ivs,
                                  std::uint16_t fp, int cols);

// A_u = [r A]: prepends r as column 0. Throws on length mismatch.
SensingMatrix augment_error_matrix(const SensingMatrix& a,
                                   const Eigen::VectorXd& r);

// B_u = [[1, 0], [0, B]]: unit top-left entry, zero borders.
SensingMatrix augment_compression_matrix(const SensingMatrix& b);

// Largest normalized inner product between measurement rows of phi and
// columns of psi. Throws when a row of phi or a column of psi is zero.
CoherenceReport mutual_coherence(const SensingMatrix& phi,
                                 const Eigen::MatrixXd& psi);

// Numerical column rank test; tolerance max(rows,cols) * eps * sigma_max.
bool is_full_rank(const Eigen::MatrixXd& a);
bool is_full_rank(const SensingMatrix& a);

// Plain-text dump for cross-implementation diffing: header "rows cols kind",
// then dense rows or (col:weight) pairs for the sparse kind.
void dump_matrix(const SensingMatrix& a, std::ostream& out);

}  // namespace encrust
