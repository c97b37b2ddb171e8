#include "encrust/l1solver.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>

namespace encrust {

namespace {

Eigen::VectorXd shrinkage(const Eigen::VectorXd& vec, double kappa) {
  return (vec.array() - kappa).max(0.0) - (-vec.array() - kappa).max(0.0);
}

}  // namespace

SolverResult solve_basis_pursuit(const BasisPursuitProblem& problem,
                                 const SolverConfig& config) {
  const Eigen::MatrixXd& c = problem.constraint;
  const Eigen::VectorXd& b = problem.rhs;
  if (c.rows() != b.size()) {
    throw std::invalid_argument("solve_basis_pursuit: shape mismatch");
  }
  if (!c.allFinite() || !b.allFinite() || !std::isfinite(problem.epsilon)) {
    throw std::invalid_argument("solve_basis_pursuit: non-finite input");
  }
  if (config.max_iters < 1 || config.rho <= 0.0 || config.tol_primal <= 0.0 ||
      config.tol_dual <= 0.0) {
    throw std::invalid_argument("solve_basis_pursuit: bad solver config");
  }

  const Eigen::Index p = c.rows();
  const Eigen::Index q = c.cols();
  const double b_norm = b.norm();

  SolverResult result;
  result.solution = Eigen::VectorXd::Zero(q);
  if (b_norm == 0.0) {
    // The zero vector is feasible and has minimal l1 norm.
    result.converged = true;
    return result;
  }

  // ADMM on  min |z1|_1 + I_ball(z2)  s.t.  z1 = x, z2 = Cx. Both blocks
  // share the penalty, so the x-update system is independent of rho and
  // the factorization survives the adaptive penalty updates below.
  const Eigen::MatrixXd gram =
      Eigen::MatrixXd::Identity(q, q) + c.transpose() * c;
  const Eigen::LDLT<Eigen::MatrixXd> factor(gram);

  // Solve at unit solution scale (BP is positively homogeneous) so the
  // rho = 1 shrinkage step suits any input amplitude. The ridge point
  // estimates the solution's magnitude.
  const Eigen::VectorXd ridge = factor.solve(c.transpose() * b);
  const double beta = std::max(ridge.cwiseAbs().maxCoeff(), 1e-300);
  const Eigen::VectorXd bn = b / beta;
  const double eps =
      problem.mode == BpMode::denoised ? problem.epsilon / beta : 0.0;

  constexpr double kRelaxation = 1.6;

  double rho = config.rho;
  Eigen::VectorXd x = ridge / beta;  // warm start at the ridge point
  Eigen::VectorXd z1 = x;
  Eigen::VectorXd z2 = bn;  // feasible start
  Eigen::VectorXd u1 = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd u2 = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd z1_old(q), z2_old(p), cx(p), x_relaxed(q), cx_relaxed(p);

  for (int iter = 1; iter <= config.max_iters; ++iter) {
    x = factor.solve((z1 - u1) + c.transpose() * (z2 - u2));
    cx.noalias() = c * x;

    z1_old.swap(z1);
    z2_old.swap(z2);
    x_relaxed = kRelaxation * x + (1.0 - kRelaxation) * z1_old;
    cx_relaxed = kRelaxation * cx + (1.0 - kRelaxation) * z2_old;
    z1 = shrinkage(x_relaxed + u1, 1.0 / rho);
    // Project onto the feasible ball around bn (a point if eps=0).
    Eigen::VectorXd w = cx_relaxed + u2 - bn;
    const double w_norm = w.norm();
    if (w_norm > eps) {
      w *= eps > 0.0 ? eps / w_norm : 0.0;
    }
    z2 = bn + w;

    u1 += x_relaxed - z1;
    u2 += cx_relaxed - z2;

    const double r_norm =
        std::sqrt((x - z1).squaredNorm() + (cx - z2).squaredNorm());
    const double s_norm =
        rho * std::sqrt((z1 - z1_old).squaredNorm() +
                        (c.transpose() * (z2 - z2_old)).squaredNorm());
    result.iterations = iter;

    const double primal_scale =
        std::max({1.0, std::sqrt(x.squaredNorm() + cx.squaredNorm()),
                  std::sqrt(z1.squaredNorm() + z2.squaredNorm())});
    const double dual_scale =
        std::max(1.0, rho * (u1 + c.transpose() * u2).norm());
    if (r_norm <= config.tol_primal * primal_scale &&
        s_norm <= config.tol_dual * dual_scale &&
        (cx - bn).norm() <= eps + config.tol_primal * (1.0 + bn.norm())) {
      result.converged = true;
      break;
    }

    // Residual balancing (Boyd et al. sec. 3.4.1). The normalized problem
    // makes the raw comparison meaningful; the scaled duals absorb the
    // penalty change. Skip the first iterations while the duals warm up.
    if (iter % 10 == 0 && iter >= 50) {
      if (r_norm > 10.0 * s_norm && rho < 1e3) {
        rho *= 2.0;
        u1 *= 0.5;
        u2 *= 0.5;
      } else if (s_norm > 10.0 * r_norm && rho > 1e-3) {
        rho *= 0.5;
        u1 *= 2.0;
        u2 *= 2.0;
      }
    }
  }

  result.solution = beta * x;
  result.residual = (c * result.solution - b).norm();
  return result;
}

Eigen::MatrixXd dct_basis(int n) {
  if (n < 1) {
    throw std::invalid_argument("dct_basis: n must be >= 1");
  }
  Eigen::MatrixXd psi(n, n);
  const double pi = std::acos(-1.0);
  for (int k = 0; k < n; ++k) {
    const double amp = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (int i = 0; i < n; ++i) {
      psi(i, k) = amp * std::cos(pi * (2.0 * i + 1.0) * k / (2.0 * n));
    }
  }
  return psi;
}

}  // namespace encrust
