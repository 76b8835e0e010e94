#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseLU>

#include <stdexcept>
#include <string>
#include <vector>

#include "discretization.hpp"
#include "splitting.hpp"

namespace parasplit {

struct KktSolution {
  Matrix states;
  Matrix controls;
  Matrix lambda;
  double stationarity_residual = 0.0;  // relative
  double feasibility_residual = 0.0;   // relative

  Iterate as_iterate() const { return Iterate{controls, states, lambda, Matrix(), Matrix()}; }
};

class KktError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr Index default_kkt_cap = 200000;

/// Monolithic: sparse LU of the full saddle-point matrix.
/// Modal: exact diagonalization of the pencil (B, A) in space, which splits
/// the system into one 2M x 2M banded problem per eigenmode.
/// Auto picks the monolithic path up to monolithic_kkt_limit unknowns.
enum class KktMethod { Auto, Monolithic, Modal };

inline constexpr Index monolithic_kkt_limit = 10000;

/// Stationarity and feasibility residuals of (Y, U, lambda) for the discrete
/// problem's Lagrangian, each relative to its data scale.
inline std::pair<double, double> kkt_residuals(const DiscreteSystem& sys, const Matrix& states,
                                               const Matrix& controls, const Matrix& lambda) {
  const double tau = sys.tau();
  const auto grad = objective_gradient(sys, states, controls);
  double stat_sq = 0.0;
  double scale_sq = 0.0;
  for (Index j = 0; j < sys.steps(); ++j) {
    const Vector a = grad.controls.col(j) + tau * (sys.mass * lambda.col(j));
    Vector b = grad.states.col(j) - sys.step_plus * lambda.col(j);
    if (j + 1 < sys.steps()) b.noalias() += sys.step_minus * lambda.col(j + 1);
    stat_sq += a.squaredNorm() + b.squaredNorm();
    scale_sq += (sys.kappa(static_cast<int>(j) + 1) * tau * sys.desired_load.col(j)).squaredNorm();
  }
  const double feas = constraint_residual(sys, states, controls).norm();
  return {std::sqrt(stat_sq) / (1.0 + std::sqrt(scale_sq)), feas / (1.0 + sys.rhs.norm())};
}

namespace detail {

inline KktSolution finish_kkt(const DiscreteSystem& sys, KktSolution sol) {
  const auto [stat, feas] = kkt_residuals(sys, sol.states, sol.controls, sol.lambda);
  sol.stationarity_residual = stat;
  sol.feasibility_residual = feas;
  if (!(stat <= 1e-9 && feas <= 1e-9)) {
    throw KktError("solve_kkt: residuals too large (stationarity " + std::to_string(stat) + ", feasibility " +
                   std::to_string(feas) + ")");
  }
  return sol;
}

/// Saddle-point system
///   [ H  -C^T ] [z]   [g]
///   [ C   0   ] [l] = [F]
/// with H = blockdiag(alpha tau A, kappa_m tau A), C the block constraint
/// matrix and g = (0, kappa_m tau d_m). Constraint rows are negated so the
/// assembled matrix is symmetric.
inline KktSolution solve_kkt_monolithic(const DiscreteSystem& sys) {
  const Index n = sys.dofs();
  const Index M = sys.steps();
  const Index total = 3 * n * M;
  const double tau = sys.tau();
  // unknown layout per step j: [U_j | Y_j | lambda_j]
  auto u_off = [n](Index j) { return 3 * n * j; };
  auto y_off = [n](Index j) { return 3 * n * j + n; };
  auto l_off = [n](Index j) { return 3 * n * j + 2 * n; };

  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(M) * 10 * (sys.mass.nonZeros() + sys.stiffness.nonZeros()));
  auto add = [&t](const SparseMatrix& block, double s, Index r0, Index c0, bool symmetric_pair) {
    for (Index k = 0; k < block.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(block, k); it; ++it) {
        t.emplace_back(r0 + it.row(), c0 + it.col(), s * it.value());
        if (symmetric_pair) t.emplace_back(c0 + it.col(), r0 + it.row(), s * it.value());
      }
    }
  };
  Vector rhs = Vector::Zero(total);
  for (Index j = 0; j < M; ++j) {
    const double kappa = sys.kappa(static_cast<int>(j) + 1);
    add(sys.mass, sys.alpha * tau, u_off(j), u_off(j), false);
    add(sys.mass, kappa * tau, y_off(j), y_off(j), false);
    // U_j row: + tau A lambda_j ; constraint row (negated): + tau A U_j
    add(sys.mass, tau, u_off(j), l_off(j), true);
    // Y_j row: - step_plus lambda_j ; constraint row j (negated): - step_plus Y_j
    add(sys.step_plus, -1.0, y_off(j), l_off(j), true);
    if (j + 1 < M) {
      // Y_j row: + step_minus lambda_{j+1} ; constraint row j+1: + step_minus Y_j
      add(sys.step_minus, 1.0, y_off(j), l_off(j + 1), true);
    }
    rhs.segment(y_off(j), n) = kappa * tau * sys.desired_load.col(j);
    rhs.segment(l_off(j), n) = -sys.rhs.col(j);
  }
  SparseMatrix K(total, total);
  K.setFromTriplets(t.begin(), t.end());
  K.makeCompressed();

  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(K);
  lu.factorize(K);
  if (lu.info() != Eigen::Success) {
    throw KktError("solve_kkt: singular KKT matrix (" + lu.lastErrorMessage() + ")");
  }
  Vector x = lu.solve(rhs);
  // one step of iterative refinement
  const Vector r = rhs - K * x;
  x += lu.solve(r);

  KktSolution sol;
  sol.controls.resize(n, M);
  sol.states.resize(n, M);
  sol.lambda.resize(n, M);
  for (Index j = 0; j < M; ++j) {
    sol.controls.col(j) = x.segment(u_off(j), n);
    sol.states.col(j) = x.segment(y_off(j), n);
    sol.lambda.col(j) = x.segment(l_off(j), n);
  }
  return sol;
}

/// With B V = A V diag(mu) and V^T A V = I, substituting Y = V y and
/// lambda = V l (so U = -lambda / alpha) leaves, for each mode i with
/// p = 1 + tau mu_i / 2 and q = 1 - tau mu_i / 2,
///   kappa_j tau y_j - p l_j + q l_{j+1}   = kappa_j tau (V^T d_j)_i
///   -p y_j + q y_{j-1} - tau/alpha l_j    = -(V^T F_j)_i.
inline KktSolution solve_kkt_modal(const DiscreteSystem& sys) {
  const Index n = sys.dofs();
  const Index M = sys.steps();
  const double tau = sys.tau();
  const Matrix mass = Matrix(sys.mass);
  const Matrix stiffness = Matrix(sys.stiffness);
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> eig(stiffness, mass, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (eig.info() != Eigen::Success) throw KktError("solve_kkt: eigendecomposition failed");
  const Matrix& V = eig.eigenvectors();
  const Vector& mu = eig.eigenvalues();
  const Matrix G = V.transpose() * sys.rhs;
  const Matrix E = V.transpose() * sys.desired_load;

  Matrix y(n, M), l(n, M);
  Matrix K(2 * M, 2 * M);
  Vector b(2 * M);
  for (Index i = 0; i < n; ++i) {
    const double p = 1.0 + 0.5 * tau * mu(i);
    const double q = 1.0 - 0.5 * tau * mu(i);
    K.setZero();
    // interleaved unknowns [y_1, l_1, y_2, l_2, ...]
    for (Index j = 0; j < M; ++j) {
      const double kt = sys.kappa(static_cast<int>(j) + 1) * tau;
      const Index yr = 2 * j;
      const Index lr = 2 * j + 1;
      K(yr, yr) = kt;
      K(yr, lr) = -p;
      if (j + 1 < M) K(yr, lr + 2) = q;
      b(yr) = kt * E(i, j);
      K(lr, yr) = -p;
      if (j > 0) K(lr, yr - 2) = q;
      K(lr, lr) = -tau / sys.alpha;
      b(lr) = -G(i, j);
    }
    const Vector x = K.partialPivLu().solve(b);
    for (Index j = 0; j < M; ++j) {
      y(i, j) = x(2 * j);
      l(i, j) = x(2 * j + 1);
    }
  }
  KktSolution sol;
  sol.states = V * y;
  sol.lambda = V * l;
  sol.controls = -sol.lambda / sys.alpha;
  return sol;
}

}  // namespace detail

/// Exact solution of the discrete optimality system. Both residuals are
/// verified on the untransformed system before returning.
inline KktSolution solve_kkt(const DiscreteSystem& sys, Index cap = default_kkt_cap,
                             KktMethod method = KktMethod::Auto) {
  const Index total = 3 * sys.dofs() * sys.steps();
  if (total > cap) {
    throw KktError("solve_kkt: system has " + std::to_string(total) + " unknowns, cap is " + std::to_string(cap));
  }
  if (method == KktMethod::Auto) method = total <= monolithic_kkt_limit ? KktMethod::Monolithic : KktMethod::Modal;
  return detail::finish_kkt(sys, method == KktMethod::Monolithic ? detail::solve_kkt_monolithic(sys)
                                                                 : detail::solve_kkt_modal(sys));
}

}  // namespace parasplit
