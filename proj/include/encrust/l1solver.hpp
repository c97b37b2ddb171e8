#pragma once

#include <Eigen/Core>

namespace encrust {

struct SolverConfig {
  int max_iters = 5000;
  double tol_primal = 1e-6;
  double tol_dual = 1e-6;
  double rho = 1.0;  // augmented Lagrangian penalty
};

enum class BpMode { exact, denoised };

// min |v|_1  s.t.  C v = b            (exact)
// min |v|_1  s.t.  |C v - b|_2 <= eps (denoised)
struct BasisPursuitProblem {
  Eigen::MatrixXd constraint;  // p x q, p <= q
  Eigen::VectorXd rhs;
  BpMode mode = BpMode::exact;
  double epsilon = 0.0;
};

struct SolverResult {
  Eigen::VectorXd solution;
  int iterations = 0;
  double residual = 0.0;  // |C * solution - rhs|_2
  bool converged = false;
};

// ADMM over the splitting v -> (v, Cv) with an l1 shrinkage step and a
// projection of Cv onto the rhs (exact) or the eps-ball around it
// (denoised). The per-iteration system (I + C^T C) is factorized once.
// See Boyd et al., "Distributed Optimization and Statistical Learning via
// the Alternating Direction Method of Multipliers", Found. Trends ML 2011.
// Never throws on non-convergence: the best iterate is returned with
// converged = false. Non-finite inputs are rejected.
SolverResult solve_basis_pursuit(const BasisPursuitProblem& problem,
                                 const SolverConfig& config = {});

// Orthonormal DCT-II synthesis basis: x = psi * theta, theta = psi^T * x.
Eigen::MatrixXd dct_basis(int n);

}  // namespace encrust
