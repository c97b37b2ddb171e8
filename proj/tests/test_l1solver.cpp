#include <doctest.h>

#include <Eigen/Core>
#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "encrust/l1solver.hpp"

using namespace encrust;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      m(i, j) = normal(rng);
    }
  }
  return m;
}

// Exhaustive minimum-l1 search over all k-sparse supports, solving the
// constrained least-squares subproblem on each support. Independent of the
// ADMM path by construction.
Eigen::VectorXd oracle_sparse_solution(const Eigen::MatrixXd& c,
                                       const Eigen::VectorXd& b, int k,
                                       double feasibility_tol) {
  const int q = static_cast<int>(c.cols());
  std::vector<int> support(static_cast<std::size_t>(k));
  Eigen::VectorXd best;
  double best_l1 = std::numeric_limits<double>::infinity();

  const std::function<void(int, int)> enumerate = [&](int start, int depth) {
    if (depth == k) {
      Eigen::MatrixXd sub(c.rows(), k);
      for (int j = 0; j < k; ++j) {
        sub.col(j) = c.col(support[static_cast<std::size_t>(j)]);
      }
      const Eigen::VectorXd coeffs =
          sub.colPivHouseholderQr().solve(b);
      if ((sub * coeffs - b).norm() <= feasibility_tol) {
        const double l1 = coeffs.lpNorm<1>();
        if (l1 < best_l1) {
          best_l1 = l1;
          best = Eigen::VectorXd::Zero(q);
          for (int j = 0; j < k; ++j) {
            best(support[static_cast<std::size_t>(j)]) = coeffs(j);
          }
        }
      }
      return;
    }
    for (int i = start; i < q; ++i) {
      support[static_cast<std::size_t>(depth)] = i;
      enumerate(i + 1, depth + 1);
    }
  };
  enumerate(0, 0);
  REQUIRE(best.size() == q);
  return best;
}

}  // namespace

TEST_CASE("fully determined system returns the unique point") {
  BasisPursuitProblem problem;
  problem.constraint = Eigen::MatrixXd::Identity(2, 2);
  problem.rhs = Eigen::Vector2d(3.0, 0.0);
  const SolverResult result = solve_basis_pursuit(problem);
  CHECK(result.converged);
  CHECK(result.solution(0) == doctest::Approx(3.0).epsilon(1e-5));
  CHECK(result.solution(1) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("zero rhs short-circuits to the zero vector") {
  BasisPursuitProblem problem;
  problem.constraint = random_matrix(4, 9, 2);
  problem.rhs = Eigen::VectorXd::Zero(4);
  const SolverResult result = solve_basis_pursuit(problem);
  CHECK(result.converged);
  CHECK(result.solution.norm() == 0.0);
  CHECK(result.iterations == 0);
}

TEST_CASE("non-finite input is rejected") {
  BasisPursuitProblem problem;
  problem.constraint = Eigen::MatrixXd::Identity(2, 2);
  problem.rhs = Eigen::Vector2d(std::nan(""), 0.0);
  CHECK_THROWS_AS(solve_basis_pursuit(problem), std::invalid_argument);
}

TEST_CASE("planted 3-sparse vector is recovered and matches the oracle") {
  const Eigen::MatrixXd c = random_matrix(20, 50, 11);
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(50);
  truth(4) = 1.7;
  truth(23) = -2.4;
  truth(41) = 0.9;
  BasisPursuitProblem problem;
  problem.constraint = c;
  problem.rhs = c * truth;

  const SolverResult result = solve_basis_pursuit(problem);
  CHECK(result.converged);
  CHECK((result.solution - truth).norm() < 1e-4);

  const Eigen::VectorXd oracle =
      oracle_sparse_solution(c, problem.rhs, 3, 1e-8 * problem.rhs.norm());
  CHECK((result.solution - oracle).norm() < 1e-4);
}

TEST_CASE("small-instance oracle equivalence across several seeds") {
  for (const std::uint64_t seed : {21u, 22u, 23u}) {
    const Eigen::MatrixXd c = random_matrix(12, 30, seed);
    std::mt19937_64 rng(seed * 1000 + 5);
    std::uniform_int_distribution<int> position(0, 29);
    std::uniform_real_distribution<double> value(0.5, 2.0);
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(30);
    int placed = 0;
    while (placed < 2) {
      const int pos = position(rng);
      if (truth(pos) == 0.0) {
        truth(pos) = value(rng) * (placed % 2 ? -1.0 : 1.0);
        ++placed;
      }
    }
    BasisPursuitProblem problem;
    problem.constraint = c;
    problem.rhs = c * truth;
    const SolverResult result = solve_basis_pursuit(problem);
    const Eigen::VectorXd oracle =
        oracle_sparse_solution(c, problem.rhs, 2, 1e-8 * problem.rhs.norm());
    CHECK(result.converged);
    CHECK((result.solution - oracle).norm() < 1e-4);
  }
}

TEST_CASE("converged exact solutions are feasible") {
  const Eigen::MatrixXd c = random_matrix(15, 40, 31);
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(40);
  truth(7) = 3.0;
  truth(22) = -1.0;
  BasisPursuitProblem problem;
  problem.constraint = c;
  problem.rhs = c * truth;
  const SolverConfig config;
  const SolverResult result = solve_basis_pursuit(problem, config);
  CHECK(result.converged);
  CHECK(result.residual <= config.tol_primal * (1.0 + problem.rhs.norm()));
}

TEST_CASE("l1 optimum never exceeds the least-squares feasible point") {
  const Eigen::MatrixXd c = random_matrix(10, 25, 43);
  const Eigen::VectorXd b = random_matrix(10, 1, 44);
  BasisPursuitProblem problem;
  problem.constraint = c;
  problem.rhs = b;
  const SolverResult result = solve_basis_pursuit(problem);
  // minimum-l2-norm feasible point
  const Eigen::VectorXd least_squares =
      c.transpose() *
      (c * c.transpose()).ldlt().solve(b);
  CHECK(result.solution.lpNorm<1>() <=
        least_squares.lpNorm<1>() + 1e-6 * (1.0 + least_squares.lpNorm<1>()));
}

TEST_CASE("scale equivariance in the rhs") {
  const Eigen::MatrixXd c = random_matrix(14, 33, 51);
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(33);
  truth(3) = 1.0;
  truth(17) = -2.0;
  BasisPursuitProblem problem;
  problem.constraint = c;
  problem.rhs = c * truth;
  const SolverResult base = solve_basis_pursuit(problem);

  BasisPursuitProblem scaled = problem;
  scaled.rhs *= 7.5;
  const SolverResult result = solve_basis_pursuit(scaled);
  CHECK((result.solution - 7.5 * base.solution).norm() <
        1e-4 * (1.0 + base.solution.norm() * 7.5));
}

TEST_CASE("denoised mode tolerates bounded residual noise") {
  const Eigen::MatrixXd c = random_matrix(20, 50, 61);
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(50);
  truth(10) = 2.0;
  truth(31) = -1.5;
  std::mt19937_64 rng(62);
  std::normal_distribution<double> noise(0.0, 0.01);
  Eigen::VectorXd b = c * truth;
  for (int i = 0; i < b.size(); ++i) {
    b(i) += noise(rng);
  }
  BasisPursuitProblem problem;
  problem.constraint = c;
  problem.rhs = b;
  problem.mode = BpMode::denoised;
  problem.epsilon = 0.01 * std::sqrt(20.0) * 3.0;
  const SolverResult result = solve_basis_pursuit(problem);
  CHECK(result.converged);
  CHECK(result.residual <= problem.epsilon * 1.01);
  CHECK((result.solution - truth).norm() < 0.2);
}

TEST_CASE("iteration cap reports converged=false instead of throwing") {
  const Eigen::MatrixXd c = random_matrix(18, 45, 71);
  BasisPursuitProblem problem;
  problem.constraint = c;
  problem.rhs = random_matrix(18, 1, 72);
  SolverConfig config;
  config.max_iters = 3;
  const SolverResult result = solve_basis_pursuit(problem, config);
  CHECK_FALSE(result.converged);
  CHECK(result.iterations == 3);
  CHECK(result.solution.allFinite());
}

TEST_CASE("dct basis is orthonormal and compacts smooth signals") {
  CHECK(dct_basis(1)(0, 0) == doctest::Approx(1.0));

  const Eigen::MatrixXd psi = dct_basis(8);
  const Eigen::MatrixXd gram = psi.transpose() * psi;
  CHECK((gram - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() <
        1e-10);

  // A constant signal lands entirely in the DC coefficient.
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(8);
  const Eigen::VectorXd theta = psi.transpose() * ones;
  CHECK(theta(0) == doctest::Approx(std::sqrt(8.0)));
  CHECK(theta.tail(7).cwiseAbs().maxCoeff() < 1e-12);
}
