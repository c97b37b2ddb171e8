#include "encrust/matgen.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace encrust {

namespace {

const char* kind_name(MatrixKind kind) {
  switch (kind) {
    case MatrixKind::binary:
      return "binary";
    case MatrixKind::sparse:
      return "sparse";
    case MatrixKind::augmented:
      return "augmented";
    case MatrixKind::projection:
      return "projection";
    case MatrixKind::product:
      return "product";
  }
  return "unknown";
}

}  // namespace

SensingMatrix build_sparse_matrix(std::uint16_t iv, std::uint16_t fp,
                                  int shift_bits, std::uint16_t lsb_mask,
                                  int d, int rows, int cols) {
  if (d < 1) {
    throw std::invalid_argument("build_sparse_matrix: d must be >= 1");
  }
  if (rows < 1 || cols < 1) {
    throw std::invalid_argument("build_sparse_matrix: empty shape");
  }
  Lfsr16 lfsr = lfsr_new(fp, iv);
  SensingMatrix out;
  out.m = Eigen::MatrixXd::Zero(rows, cols);
  out.kind = MatrixKind::sparse;
  out.row_weight = d;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < d; ++j) {
      const Alg1Step step = lfsr_step_alg1(lfsr);
      const auto raw = static_cast<std::uint16_t>(
          (step.index_source >> shift_bits) ^ (step.index_source & lsb_mask));
      const int col = static_cast<int>(raw % static_cast<std::uint16_t>(cols));
      out.m(i, col) += step.msb_was_set ? -1.0 : 1.0;
    }
  }
  return out;
}

SensingMatrix build_sparse_matrix(std::uint16_t iv, std::uint16_t fp, int d,
                                  int rows, int cols) {
  return build_sparse_matrix(iv, fp, 8, 0x00ff, d, rows, cols);
}

SensingMatrix build_binary_matrix(std::uint16_t iv, std::uint16_t fp, int rows,
                                  int cols) {
  const std::vector<std::uint16_t> ivs(static_cast<std::size_t>(rows), iv);
  return build_binary_matrix(ivs, fp, cols);
}

SensingMatrix build_binary_matrix(std::span<const std::uint16_t> row_ivs,
                                  std::uint16_t fp, int cols) {
  if (row_ivs.empty() || cols < 1) {
    throw std::invalid_argument("build_binary_matrix: empty shape");
  }
  SensingMatrix out;
  out.m.resize(static_cast<Eigen::Index>(row_ivs.size()), cols);
  out.kind = MatrixKind::binary;
  for (Eigen::Index i = 0; i < out.m.rows(); ++i) {
    Lfsr16 lfsr = lfsr_new(fp, row_ivs[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < cols; ++j) {
      out.m(i, j) = lfsr_step_galois(lfsr) ? 1.0 : -1.0;
    }
  }
  return out;
}

SensingMatrix augment_error_matrix(const SensingMatrix& a,
                                   const Eigen::VectorXd& r) {
  if (r.size() != a.rows()) {
    throw std::invalid_argument("augment_error_matrix: r length != rows(A)");
  }
  SensingMatrix out;
  out.m.resize(a.rows(), a.cols() + 1);
  out.m.col(0) = r;
  out.m.rightCols(a.cols()) = a.m;
  out.kind = MatrixKind::augmented;
  return out;
}

SensingMatrix augment_compression_matrix(const SensingMatrix& b) {
  SensingMatrix out;
  out.m = Eigen::MatrixXd::Zero(b.rows() + 1, b.cols() + 1);
  out.m(0, 0) = 1.0;
  out.m.bottomRightCorner(b.rows(), b.cols()) = b.m;
  out.kind = MatrixKind::augmented;
  return out;
}

CoherenceReport mutual_coherence(const SensingMatrix& phi,
                                 const Eigen::MatrixXd& psi) {
  if (phi.cols() != psi.rows()) {
    throw std::invalid_argument("mutual_coherence: inner dimensions differ");
  }
  const Eigen::VectorXd row_norms = phi.m.rowwise().norm();
  const Eigen::VectorXd col_norms = psi.colwise().norm();
  if ((row_norms.array() == 0.0).any() || (col_norms.array() == 0.0).any()) {
    throw std::invalid_argument("mutual_coherence: zero measurement vector");
  }
  // max_{i,j} |<phi_i, psi_j>| / (|phi_i| |psi_j|) over measurement rows of
  // phi and basis columns of psi.
  const Eigen::MatrixXd inner = (phi.m * psi).cwiseAbs();
  const Eigen::MatrixXd normalized =
      (row_norms * col_norms.transpose()).cwiseInverse().cwiseProduct(inner);
  CoherenceReport report;
  report.mu = normalized.maxCoeff();
  report.d = phi.row_weight;
  report.reference_lo = 0.24;
  report.reference_hi = 0.32;
  return report;
}

bool is_full_rank(const Eigen::MatrixXd& a) {
  if (a.rows() < a.cols()) {
    return false;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (sv.size() == 0) {
    return false;
  }
  const double tol = static_cast<double>(std::max(a.rows(), a.cols())) *
                     std::numeric_limits<double>::epsilon() * sv(0);
  return sv(sv.size() - 1) > tol;
}

bool is_full_rank(const SensingMatrix& a) { return is_full_rank(a.m); }

void dump_matrix(const SensingMatrix& a, std::ostream& out) {
  out << a.rows() << ' ' << a.cols() << ' ' << kind_name(a.kind) << '\n';
  if (a.kind == MatrixKind::sparse) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      bool first = true;
      for (Eigen::Index j = 0; j < a.cols(); ++j) {
        const double v = a.m(i, j);
        if (v != 0.0) {
          if (!first) {
            out << ' ';
          }
          out << '(' << j << ':' << static_cast<long long>(v) << ')';
          first = false;
        }
      }
      out << '\n';
    }
  } else {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index j = 0; j < a.cols(); ++j) {
        if (j) {
          out << ' ';
        }
        out << a.m(i, j);
      }
      out << '\n';
    }
  }
}

}  // namespace encrust
