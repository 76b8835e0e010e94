#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "fem.hpp"
#include "problem.hpp"
#include "sparse.hpp"

namespace parasplit {

/// Equidistant partition 0 = t_0 < ... < t_M = T.
struct TimeGrid {
  double final_time = 1.0;
  int steps = 1;

  TimeGrid() = default;
  TimeGrid(double T, int M) : final_time(T), steps(M) {
    if (M < 1) throw std::invalid_argument("TimeGrid: step count must be positive");
    if (!(T > 0.0)) throw std::invalid_argument("TimeGrid: final time must be positive");
  }

  double tau() const { return final_time / steps; }
  double time(int m) const { return m == steps ? final_time : m * tau(); }
  /// Midpoint of the m-th step, (t_{m-1} + t_m) / 2, for m = 1..M.
  double midpoint(int m) const { return (m - 0.5) * tau(); }
};

/// Crank-Nicolson block system and every operator the splitting solver needs.
///
/// Trajectories are stored as matrices with one column per time step:
/// column m-1 of a state matrix is Y_m and column m-1 of a control matrix is
/// U_{m-1/2}, for m = 1..M. The state equation for step m reads
///   step_plus Y_m - step_minus Y_{m-1} - tau A U_{m-1/2} = rhs_m
/// with Y_0 moved into rhs_1.
struct DiscreteSystem {
  FemSpace space;
  TimeGrid grid;
  double alpha = 1e-2;

  SparseMatrix mass;        // A
  SparseMatrix stiffness;   // B
  SparseMatrix step_plus;   // A + tau/2 B
  SparseMatrix step_minus;  // A - tau/2 B

  Matrix rhs;           // right-hand side blocks, Y_0 folded into the first
  Matrix desired_load;  // d_m = (phi, y_d(t_m))
  Vector initial_state;

  // Operators of the closed-form subproblem solves.
  SparseMatrix control_mass;   // tau A
  SparseMatrix control_gram;   // tau^2 A^T A
  SparseMatrix state_gram;     // step_plus^T step_plus + step_minus^T step_minus
  SparseMatrix terminal_gram;  // step_plus^T step_plus

  SpaceTimeFunction desired_state;

  Index dofs() const { return space.size(); }
  int steps() const { return grid.steps; }
  double tau() const { return grid.tau(); }

  /// Trapezoidal weight of state block m (1-based): 1 inside, 1/2 at t_M.
  double kappa(int m) const { return m == grid.steps ? 0.5 : 1.0; }
};

inline DiscreteSystem build_system(const ManufacturedProblem& problem, const FemSpace& space,
                                   const TimeGrid& grid, double alpha) {
  if (problem.bc != space.bc()) {
    throw std::invalid_argument("build_system: boundary condition of problem and space differ");
  }
  if (!(alpha > 0.0)) throw std::invalid_argument("build_system: alpha must be positive");
  DiscreteSystem sys;
  sys.space = space;
  sys.grid = grid;
  sys.alpha = alpha;
  sys.desired_state = problem.desired_state;

  const double tau = grid.tau();
  const int M = grid.steps;
  sys.mass = assemble_mass(space);
  sys.stiffness = assemble_stiffness(space);
  sys.step_plus = sys.mass + (0.5 * tau) * sys.stiffness;
  sys.step_minus = sys.mass - (0.5 * tau) * sys.stiffness;

  sys.initial_state = interpolate_nodal(space, problem.initial_state);
  sys.rhs.resize(space.size(), M);
  sys.desired_load.resize(space.size(), M);
  for (int m = 1; m <= M; ++m) {
    sys.rhs.col(m - 1) = load_vector(space, at_time(problem.source, grid.midpoint(m)), tau);
    sys.desired_load.col(m - 1) = load_vector(space, at_time(problem.desired_state, grid.time(m)));
  }
  sys.rhs.col(0) += sys.step_minus * sys.initial_state;

  const SparseMatrix mass_sq = symmetrized(SparseMatrix(sys.mass.transpose() * sys.mass));
  sys.control_mass = tau * sys.mass;
  sys.control_gram = (tau * tau) * mass_sq;
  sys.terminal_gram = symmetrized(SparseMatrix(sys.step_plus.transpose() * sys.step_plus));
  const SparseMatrix minus_gram = symmetrized(SparseMatrix(sys.step_minus.transpose() * sys.step_minus));
  sys.state_gram = sys.terminal_gram + minus_gram;
  return sys;
}

inline DiscreteSystem build_system(const ManufacturedProblem& problem, const FemSpace& space,
                                   const TimeGrid& grid) {
  return build_system(problem, space, grid, problem.alpha);
}

namespace detail {

inline void check_trajectory(const DiscreteSystem& sys, const Matrix& x, const char* what) {
  require_same_size(sys.dofs(), x.rows(), what);
  require_same_size(sys.steps(), x.cols(), what);
}

}  // namespace detail

/// Residual of the separable constraint sum_m A_m Y_m + sum_m B_m U_{m-1/2} - F,
/// one column per step. The block matrices are never formed.
inline Matrix constraint_residual(const DiscreteSystem& sys, const Matrix& states,
                                  const Matrix& controls, int threads = 1) {
  detail::check_trajectory(sys, states, "constraint_residual");
  detail::check_trajectory(sys, controls, "constraint_residual");
  const double tau = sys.tau();
  Matrix r(sys.dofs(), sys.steps());
  parallel_for(sys.steps(), threads, [&](Index j) {
    auto col = r.col(j);
    col.noalias() = sys.step_plus * states.col(j);
    col.noalias() -= tau * (sys.mass * controls.col(j));
    if (j > 0) col.noalias() -= sys.step_minus * states.col(j - 1);
    col -= sys.rhs.col(j);
  });
  return r;
}

/// Discrete objective in vector form; the constant |y_d|^2 terms are omitted.
inline double objective_vec(const DiscreteSystem& sys, const Matrix& states, const Matrix& controls) {
  detail::check_trajectory(sys, states, "objective_vec");
  detail::check_trajectory(sys, controls, "objective_vec");
  const double tau = sys.tau();
  double value = 0.0;
  for (int m = 1; m <= sys.steps(); ++m) {
    const Vector y = states.col(m - 1);
    const Vector u = controls.col(m - 1);
    value += sys.kappa(m) * 0.5 * tau * (quadratic_form(sys.mass, y) - 2.0 * sys.desired_load.col(m - 1).dot(y));
    value += 0.5 * sys.alpha * tau * quadratic_form(sys.mass, u);
  }
  return value;
}

/// Terms of the quadrature objective that do not depend on (Y, U): the
/// t_0 mismatch and the |y_d(t_m)|^2 contributions.
inline double objective_constant(const DiscreteSystem& sys) {
  const double tau = sys.tau();
  const Vector zero = Vector::Zero(sys.dofs());
  double value = 0.25 * tau * l2_error_sq(sys.space, sys.initial_state, at_time(sys.desired_state, 0.0));
  for (int m = 1; m <= sys.steps(); ++m) {
    value += sys.kappa(m) * 0.5 * tau * l2_error_sq(sys.space, zero, at_time(sys.desired_state, sys.grid.time(m)));
  }
  return value;
}

/// Trapezoidal (state) and midpoint (control) quadrature of the objective with
/// spatial L2 norms against the continuous desired state.
inline double objective_quadrature(const DiscreteSystem& sys, const Matrix& states, const Matrix& controls) {
  detail::check_trajectory(sys, states, "objective_quadrature");
  detail::check_trajectory(sys, controls, "objective_quadrature");
  const double tau = sys.tau();
  double tracking = 0.5 * tau * l2_error_sq(sys.space, sys.initial_state, at_time(sys.desired_state, 0.0));
  double control = 0.0;
  for (int m = 1; m <= sys.steps(); ++m) {
    const double w = m == sys.steps() ? 0.5 * tau : tau;
    tracking += w * l2_error_sq(sys.space, states.col(m - 1), at_time(sys.desired_state, sys.grid.time(m)));
    control += l2_error_sq(sys.space, controls.col(m - 1), SpatialFunction{});
  }
  return 0.5 * tracking + 0.5 * sys.alpha * tau * control;
}

struct TrajectoryGradient {
  Matrix states;
  Matrix controls;
};

/// Gradient of objective_vec.
inline TrajectoryGradient objective_gradient(const DiscreteSystem& sys, const Matrix& states,
                                             const Matrix& controls) {
  detail::check_trajectory(sys, states, "objective_gradient");
  detail::check_trajectory(sys, controls, "objective_gradient");
  const double tau = sys.tau();
  TrajectoryGradient g{Matrix(sys.dofs(), sys.steps()), Matrix(sys.dofs(), sys.steps())};
  for (int m = 1; m <= sys.steps(); ++m) {
    g.states.col(m - 1) = sys.kappa(m) * tau * (sys.mass * states.col(m - 1) - sys.desired_load.col(m - 1));
    g.controls.col(m - 1) = sys.alpha * tau * (sys.mass * controls.col(m - 1));
  }
  return g;
}

}  // namespace parasplit
