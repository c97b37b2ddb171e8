#include <doctest.h>

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <sstream>

#include "encrust/l1solver.hpp"
#include "encrust/matgen.hpp"
#include "encrust/prng.hpp"

using namespace encrust;

namespace {

// Independent trace of the sparse construction pseudo-code, kept separate
// from the library path on purpose.
Eigen::MatrixXd reference_sparse(std::uint16_t iv, std::uint16_t fp, int d,
                                 int rows, int cols) {
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(rows, cols);
  std::uint16_t sr = iv;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < d; ++j) {
      const bool msb = (sr & 0x8000u) != 0;
      if (msb) {
        sr = static_cast<std::uint16_t>(sr ^ fp);
      }
      const auto index =
          static_cast<std::uint16_t>(((sr >> 8) ^ (sr & 0x00ffu)) %
                                     static_cast<std::uint16_t>(cols));
      phi(i, index) += msb ? -1.0 : 1.0;
      sr = static_cast<std::uint16_t>(sr << 1);
    }
  }
  return phi;
}

}  // namespace

TEST_CASE("sparse matrix matches an independent pseudo-code trace") {
  const SensingMatrix built =
      build_sparse_matrix(0xffff, kDefaultFeedbackMask, 15, 96, 256);
  const Eigen::MatrixXd reference =
      reference_sparse(0xffff, kDefaultFeedbackMask, 15, 96, 256);
  CHECK((built.m == reference));

  const SensingMatrix small =
      build_sparse_matrix(0x0101, kDefaultFeedbackMask, 7, 150, 96);
  CHECK((small.m == reference_sparse(0x0101, kDefaultFeedbackMask, 7, 150, 96)));
}

TEST_CASE("sparse rows carry at most d nonzeros and weight d in magnitude") {
  const int d = 15;
  const SensingMatrix phi =
      build_sparse_matrix(0xffff, kDefaultFeedbackMask, d, 96, 256);
  for (Eigen::Index i = 0; i < phi.rows(); ++i) {
    int nonzeros = 0;
    double weight = 0.0;
    for (Eigen::Index j = 0; j < phi.cols(); ++j) {
      if (phi.m(i, j) != 0.0) {
        ++nonzeros;
        weight += std::abs(phi.m(i, j));
      }
    }
    CHECK(nonzeros <= d);
    // Signed collisions can cancel, so the magnitude sum never exceeds d.
    CHECK(weight <= d);
  }
}

TEST_CASE("d=1 rows hold exactly one +/-1 entry") {
  const SensingMatrix phi =
      build_sparse_matrix(0xffff, kDefaultFeedbackMask, 1, 64, 256);
  for (Eigen::Index i = 0; i < phi.rows(); ++i) {
    CHECK(phi.m.row(i).cwiseAbs().sum() == 1.0);
  }
}

TEST_CASE("sparse construction is deterministic") {
  const SensingMatrix a =
      build_sparse_matrix(0xffff, kDefaultFeedbackMask, 15, 96, 256);
  const SensingMatrix b =
      build_sparse_matrix(0xffff, kDefaultFeedbackMask, 15, 96, 256);
  CHECK((a.m == b.m));
}

TEST_CASE("binary matrix first row trace and entry range") {
  const SensingMatrix one_row =
      build_binary_matrix(0x8000, kDefaultFeedbackMask, 1, 3);
  CHECK(one_row.m(0, 0) == 1.0);  // MSB of 0x8000 is set

  const SensingMatrix phi =
      build_binary_matrix(0xffff, kDefaultFeedbackMask, 150, 96);
  CHECK(((phi.m.array() == 1.0) || (phi.m.array() == -1.0)).all());
  const double mean = phi.m.mean();
  CHECK(mean > -0.1);
  CHECK(mean < 0.1);
}

TEST_CASE("binary matrix re-seeds the register per row") {
  const SensingMatrix phi =
      build_binary_matrix(0xace1, kDefaultFeedbackMask, 4, 32);
  for (Eigen::Index i = 1; i < phi.rows(); ++i) {
    CHECK((phi.m.row(i) == phi.m.row(0)));
  }

  const std::vector<std::uint16_t> seeds = {0xace1, 0x1234, 0x8000};
  const SensingMatrix distinct = build_binary_matrix(seeds, kDefaultFeedbackMask, 32);
  CHECK((distinct.m.row(0) != distinct.m.row(1)));
  CHECK((distinct.m.row(1) != distinct.m.row(2)));
}

TEST_CASE("augment_error_matrix prepends the mask column") {
  SensingMatrix eye;
  eye.m = Eigen::MatrixXd::Identity(3, 3);
  const Eigen::VectorXd e1 = Eigen::VectorXd::Unit(3, 0);
  const SensingMatrix a_u = augment_error_matrix(eye, e1);
  CHECK(a_u.rows() == 3);
  CHECK(a_u.cols() == 4);
  CHECK((a_u.m.col(0) == e1));
  CHECK((a_u.m.rightCols(3) == eye.m));
  // removing column 0 recovers A exactly; inputs were not modified
  CHECK((eye.m == Eigen::MatrixXd::Identity(3, 3)));

  CHECK_THROWS_AS(augment_error_matrix(eye, Eigen::VectorXd::Zero(5)),
                  std::invalid_argument);

  const SensingMatrix zero_first =
      augment_error_matrix(eye, Eigen::VectorXd::Zero(3));
  CHECK_FALSE(is_full_rank(zero_first));
}

TEST_CASE("augmented error matrix with a keyed mask has full column rank") {
  const SensingMatrix a =
      build_sparse_matrix(0xffff, kDefaultFeedbackMask, 15, 150, 96);
  std::array<std::uint8_t, 24> key{};
  for (std::size_t i = 0; i < key.size(); ++i) {
    key[i] = static_cast<std::uint8_t>(i + 1);
  }
  LfgGenerator gen(key);
  Eigen::VectorXd r(150);
  for (int i = 0; i < 150; ++i) {
    r(i) = static_cast<double>(gen.next()) - 32768.0;
  }
  CHECK(is_full_rank(augment_error_matrix(a, r)));
}

TEST_CASE("augment_compression_matrix block structure") {
  SensingMatrix b;
  b.m = Eigen::MatrixXd::Constant(1, 1, 2.0);
  const SensingMatrix b_u = augment_compression_matrix(b);
  Eigen::MatrixXd expected(2, 2);
  expected << 1, 0, 0, 2;
  CHECK((b_u.m == expected));

  const SensingMatrix wide =
      build_sparse_matrix(0xffff, kDefaultFeedbackMask, 15, 96, 256);
  const SensingMatrix wide_u = augment_compression_matrix(wide);
  CHECK(wide_u.rows() == 97);
  CHECK(wide_u.cols() == 257);

  // B_u * [c; x] = [c; B x]
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(256, -1.0, 1.0);
  Eigen::VectorXd xu(257);
  xu << 3.5, x;
  const Eigen::VectorXd lifted = wide_u.m * xu;
  CHECK(lifted(0) == doctest::Approx(3.5));
  CHECK((lifted.tail(96) - wide.m * x).cwiseAbs().maxCoeff() ==
        doctest::Approx(0.0));
}

TEST_CASE("mutual coherence equals the brute-force double loop") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  SensingMatrix phi;
  phi.m.resize(3, 4);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) {
      phi.m(i, j) = unit(rng);
    }
  }
  const Eigen::MatrixXd psi = dct_basis(4);
  const CoherenceReport report = mutual_coherence(phi, psi);

  double expected = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) {
      const double num = std::abs(phi.m.row(i).dot(psi.col(j).transpose()));
      expected = std::max(expected,
                          num / (phi.m.row(i).norm() * psi.col(j).norm()));
    }
  }
  CHECK(report.mu == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("identical bases have coherence one") {
  SensingMatrix phi;
  phi.m = Eigen::MatrixXd::Identity(4, 4);
  const CoherenceReport report =
      mutual_coherence(phi, Eigen::MatrixXd::Identity(4, 4));
  CHECK(report.mu == doctest::Approx(1.0));
}

TEST_CASE("coherence is invariant to row and column scaling") {
  SensingMatrix phi;
  phi.m = Eigen::MatrixXd::Random(5, 8);
  const Eigen::MatrixXd psi = dct_basis(8);
  const double mu = mutual_coherence(phi, psi).mu;

  SensingMatrix scaled = phi;
  scaled.m.row(2) *= 17.0;
  Eigen::MatrixXd psi_scaled = psi;
  psi_scaled.col(3) *= 0.03;
  CHECK(mutual_coherence(scaled, psi_scaled).mu == doctest::Approx(mu));
}

TEST_CASE("coherence rejects zero measurement vectors") {
  SensingMatrix phi;
  phi.m = Eigen::MatrixXd::Identity(3, 3);
  phi.m.row(1).setZero();
  CHECK_THROWS(mutual_coherence(phi, Eigen::MatrixXd::Identity(3, 3)));
}

TEST_CASE("sparse matrices sit in the Gaussian coherence band") {
  const Eigen::MatrixXd psi = dct_basis(256);
  for (int d = 10; d <= 15; ++d) {
    const SensingMatrix phi =
        build_sparse_matrix(0xffff, kDefaultFeedbackMask, d, 96, 256);
    const double mu = mutual_coherence(phi, psi).mu;
    CHECK(mu >= 0.20);
    CHECK(mu <= 0.35);
  }
}

TEST_CASE("full rank check on identity, duplicate column, and Algorithm 1") {
  CHECK(is_full_rank(Eigen::MatrixXd::Identity(5, 5)));

  Eigen::MatrixXd duplicated(4, 3);
  duplicated << 1, 2, 1, 0, 1, 0, 3, 0, 3, 2, 2, 2;
  CHECK_FALSE(is_full_rank(duplicated));

  for (const int m : {96, 106, 116, 126, 136, 146}) {
    const SensingMatrix a =
        build_sparse_matrix(0xffff, kDefaultFeedbackMask, 15, 168, m);
    CHECK(is_full_rank(a));
  }
}

TEST_CASE("matrix dump format") {
  SensingMatrix sparse = build_sparse_matrix(0xffff, kDefaultFeedbackMask, 2, 2, 8);
  std::ostringstream out;
  dump_matrix(sparse, out);
  const std::string text = out.str();
  CHECK(text.find("2 8 sparse") == 0);
  CHECK(text.find('(') != std::string::npos);

  SensingMatrix binary = build_binary_matrix(0x8000, kDefaultFeedbackMask, 1, 4);
  std::ostringstream bout;
  dump_matrix(binary, bout);
  CHECK(bout.str().find("1 4 binary") == 0);
}
