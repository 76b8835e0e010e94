#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "discretization.hpp"
#include "parallel.hpp"
#include "sparse.hpp"

namespace parasplit {

struct Bounds {
  double lower = 0.0;
  double upper = 1.0;
};

struct SolverConfig {
  double beta = 10.0;
  double gamma = 1.0;
  double epsilon = 1e-12;  // stop once |w^k - w^{k+1}|_H^2 <= epsilon
  int max_iterations = 20000;
  bool stop_on_tolerance = true;  // false runs exactly max_iterations steps
  std::optional<Bounds> bounds;  // state box constraints
  // The copy constraint is imposed as c (Y - P) = 0. Small c loosens Y = P,
  // large c slows the primal blocks; 0.1 balances the two on the test meshes.
  double copy_scale = 0.1;
  int threads = 1;

  void validate() const {
    if (!(beta > 0.0)) throw std::invalid_argument("SolverConfig: beta must be positive");
    if (!(gamma > 0.0 && gamma < 2.0)) throw std::invalid_argument("SolverConfig: gamma must lie in (0, 2)");
    if (!(epsilon >= 0.0)) throw std::invalid_argument("SolverConfig: epsilon must be non-negative");
    if (max_iterations < 0) throw std::invalid_argument("SolverConfig: negative iteration cap");
    if (threads < 1) throw std::invalid_argument("SolverConfig: thread count must be positive");
    if (!(copy_scale > 0.0)) throw std::invalid_argument("SolverConfig: copy scale must be positive");
    if (bounds && !(bounds->lower < bounds->upper)) {
      throw std::invalid_argument("SolverConfig: lower bound must be below upper bound");
    }
  }
};

/// Splitting iterate: controls U_{m-1/2}, states Y_m and the multiplier of the
/// state equation, one column per step. The box variant adds a copy P of the
/// states constrained to the box and the multiplier mu of Y = P.
struct Iterate {
  Matrix controls;
  Matrix states;
  Matrix lambda;
  Matrix box_states;
  Matrix box_lambda;

  bool has_box() const { return box_states.size() > 0; }

  static Iterate zeros(const DiscreteSystem& sys, bool box = false) {
    const Index n = sys.dofs();
    const Index M = sys.steps();
    Iterate w{Matrix::Zero(n, M), Matrix::Zero(n, M), Matrix::Zero(n, M), Matrix(), Matrix()};
    if (box) {
      w.box_states = Matrix::Zero(n, M);
      w.box_lambda = Matrix::Zero(n, M);
    }
    return w;
  }
};

inline Iterate difference(const Iterate& a, const Iterate& b) {
  Iterate d{a.controls - b.controls, a.states - b.states, a.lambda - b.lambda, Matrix(), Matrix()};
  if (a.has_box() != b.has_box()) throw std::invalid_argument("difference: mixed iterate kinds");
  if (a.has_box()) {
    d.box_states = a.box_states - b.box_states;
    d.box_lambda = a.box_lambda - b.box_lambda;
  }
  return d;
}

/// Correction step w^{k+1} = w^k - nu (w^k - w~^k), applied to every block.
inline Iterate correct(const Iterate& w, const Iterate& predicted, double nu) {
  if (w.has_box() != predicted.has_box()) throw std::invalid_argument("correct: mixed iterate kinds");
  auto blend = [nu](const Matrix& a, const Matrix& b) -> Matrix {
    require_same_size(a.rows(), b.rows(), "correct");
    require_same_size(a.cols(), b.cols(), "correct");
    return a - nu * (a - b);
  };
  Iterate next{blend(w.controls, predicted.controls), blend(w.states, predicted.states),
               blend(w.lambda, predicted.lambda), Matrix(), Matrix()};
  if (w.has_box()) {
    next.box_states = blend(w.box_states, predicted.box_states);
    next.box_lambda = blend(w.box_lambda, predicted.box_lambda);
  }
  return next;
}

/// Constant corrector step gamma (1 - sqrt(b / (b + 1))) for b separable blocks.
inline double correction_factor_for_blocks(int blocks, double gamma) {
  if (blocks < 1) throw std::invalid_argument("correction_factor: block count must be positive");
  if (!(gamma > 0.0 && gamma < 2.0)) throw std::invalid_argument("correction_factor: gamma must lie in (0, 2)");
  const double b = blocks;
  return gamma * (1.0 - std::sqrt(b / (b + 1.0)));
}

/// Corrector step for the 2M-block problem (M controls, M states).
inline double correction_factor(int steps, double gamma) {
  if (steps < 1) throw std::invalid_argument("correction_factor: step count must be positive");
  return correction_factor_for_blocks(2 * steps, gamma);
}

namespace detail {

inline void check_iterate(const DiscreteSystem& sys, const Iterate& w, const char* what) {
  check_trajectory(sys, w.controls, what);
  check_trajectory(sys, w.states, what);
  check_trajectory(sys, w.lambda, what);
  if (w.has_box()) {
    check_trajectory(sys, w.box_states, what);
    check_trajectory(sys, w.box_lambda, what);
  }
}

}  // namespace detail

/// v^T H v for the contraction metric H = beta (M^T M + diag(M_l^T M_l)) with
/// 1/beta on the multiplier block, evaluated block-wise without forming H.
/// For box iterates the constraint c (Y - P) = 0 joins M and mu joins the
/// multiplier block.
inline double h_norm_sq(const DiscreteSystem& sys, const Iterate& v, double beta, int threads = 1,
                        double copy_scale = 1.0) {
  detail::check_iterate(sys, v, "h_norm_sq");
  if (!(beta > 0.0)) throw std::invalid_argument("h_norm_sq: beta must be positive");
  const double c2 = copy_scale * copy_scale;
  const Index M = sys.steps();
  const double tau = sys.tau();
  const bool box = v.has_box();
  // per-column partial sums, reduced serially in a fixed order
  Vector blocks(M), coupled(M), dual(M);
  parallel_for(M, threads, [&](Index j) {
    const Vector mu = sys.mass * v.controls.col(j);
    const Vector plus = sys.step_plus * v.states.col(j);
    double own = tau * tau * mu.squaredNorm() + plus.squaredNorm();
    if (j + 1 < M) own += (sys.step_minus * v.states.col(j)).squaredNorm();
    Vector row = plus - tau * mu;
    if (j > 0) row.noalias() -= sys.step_minus * v.states.col(j - 1);
    double sum = row.squaredNorm();
    double multipliers = v.lambda.col(j).squaredNorm();
    if (box) {
      own += c2 * (v.states.col(j).squaredNorm() + v.box_states.col(j).squaredNorm());
      sum += c2 * (v.states.col(j) - v.box_states.col(j)).squaredNorm();
      multipliers += v.box_lambda.col(j).squaredNorm();
    }
    blocks(j) = own;
    coupled(j) = sum;
    dual(j) = multipliers;
  });
  double primal = 0.0;
  double multiplier = 0.0;
  for (Index j = 0; j < M; ++j) {
    primal += blocks(j) + coupled(j);
    multiplier += dual(j);
  }
  return beta * primal + multiplier / beta;
}

struct SolveReport {
  int iterations = 0;
  bool converged = false;
  double nu = 0.0;
  std::vector<double> increment_history;  // |w^k - w^{k+1}|_H^2 per iteration
  std::vector<double> box_gap_history;    // |Y - P| per iteration, box variant only
  double constraint_residual = 0.0;       // |A Y + B U - F| at the returned iterate
  double seconds_setup = 0.0;
  double seconds_predict = 0.0;
  double seconds_correct = 0.0;
  double seconds_total = 0.0;
};

struct SolveResult {
  Iterate iterate;
  SolveReport report;
};

/// Full Jacobian decomposition of the augmented Lagrangian method with a
/// constant-step correction. All subproblem matrices are factorized once at
/// construction. The solver keeps a reference to the system, which must
/// outlive it.
class SplittingSolver {
 public:
  using Observer = std::function<void(int k, const Iterate& next, double increment_sq)>;

  SplittingSolver(const DiscreteSystem& sys, SolverConfig config) : sys_(sys), cfg_(std::move(config)) {
    cfg_.validate();
    const auto start = Clock::now();
    const double tau = sys_.tau();
    const double beta = cfg_.beta;
    const int M = sys_.steps();
    nu_ = correction_factor_for_blocks((box() ? 3 : 2) * M, cfg_.gamma);
    copy_scale_ = cfg_.copy_scale;

    SparseMatrix shift(sys_.dofs(), sys_.dofs());
    if (box()) {
      shift.setIdentity();
      shift *= beta * copy_scale_ * copy_scale_;
    }
    control_factor_ = factorize(SparseMatrix(sys_.alpha * sys_.control_mass + beta * sys_.control_gram));
    if (M > 1) state_factor_ = factorize(SparseMatrix(tau * sys_.mass + beta * sys_.state_gram + shift));
    terminal_factor_ = factorize(SparseMatrix((0.5 * tau) * sys_.mass + beta * sys_.terminal_gram + shift));
    seconds_setup_ = seconds_since(start);
  }

  const SolverConfig& config() const { return cfg_; }
  const DiscreteSystem& system() const { return sys_; }
  bool box() const { return cfg_.bounds.has_value(); }
  double nu() const { return nu_; }
  double copy_scale() const { return copy_scale_; }

  /// H-norm in the metric of this solver's constraint scaling.
  double h_norm_sq(const Iterate& v) const {
    return parasplit::h_norm_sq(sys_, v, cfg_.beta, cfg_.threads, copy_scale_);
  }

  Iterate initial_iterate() const {
    Iterate w = Iterate::zeros(sys_, box());
    if (box()) w.box_states = project(w.box_states);
    return w;
  }

  /// q = sum_l M_l z_l - F - lambda / beta.
  Matrix compute_q(const Iterate& w) const {
    detail::check_iterate(sys_, w, "compute_q");
    Matrix q = constraint_residual(sys_, w.states, w.controls, cfg_.threads);
    q -= w.lambda / cfg_.beta;
    return q;
  }

  /// (alpha tau A + beta tau^2 A^T A) U~ = beta (tau^2 A^T A U + tau A q).
  Matrix predict_controls(const Iterate& w, const Matrix& q) const {
    detail::check_iterate(sys_, w, "predict_controls");
    detail::check_trajectory(sys_, q, "predict_controls");
    const double beta = cfg_.beta;
    Matrix out(sys_.dofs(), sys_.steps());
    parallel_for(sys_.steps(), cfg_.threads, [&](Index j) {
      Vector rhs = sys_.control_gram * w.controls.col(j);
      rhs.noalias() += sys_.control_mass * q.col(j);
      out.col(j) = control_factor_.solve(beta * rhs);
    });
    return out;
  }

  /// (kappa tau A + beta D_y) Y~ = kappa tau d - beta (D_q1 q_m + D_q2 q_{m+1}) + beta D_y Y,
  /// plus c (beta c P + mu) on the right and beta c^2 I on the left in the box variant.
  Matrix predict_states(const Iterate& w, const Matrix& q) const {
    detail::check_iterate(sys_, w, "predict_states");
    detail::check_trajectory(sys_, q, "predict_states");
    const double beta = cfg_.beta;
    const double tau = sys_.tau();
    const Index M = sys_.steps();
    Matrix out(sys_.dofs(), M);
    parallel_for(M, cfg_.threads, [&](Index j) {
      const int m = static_cast<int>(j) + 1;
      const bool terminal = j + 1 == M;
      const SparseMatrix& gram = terminal ? sys_.terminal_gram : sys_.state_gram;
      Vector coupling = sys_.step_plus * q.col(j);
      if (!terminal) coupling.noalias() -= sys_.step_minus * q.col(j + 1);
      Vector rhs = gram * w.states.col(j);
      rhs -= coupling;
      if (box()) rhs += (copy_scale_ * copy_scale_) * w.box_states.col(j);
      rhs *= beta;
      rhs += (sys_.kappa(m) * tau) * sys_.desired_load.col(j);
      if (box()) rhs += copy_scale_ * w.box_lambda.col(j);
      out.col(j) = (terminal ? terminal_factor_ : state_factor_).solve(rhs);
    });
    return out;
  }

  /// P~ = projection of Y - mu / (c beta) onto the box.
  Matrix predict_box_states(const Iterate& w) const {
    if (!box()) throw std::logic_error("predict_box_states: solver has no bounds");
    return project(w.states - w.box_lambda / (copy_scale_ * cfg_.beta));
  }

  /// lambda~ = lambda - beta (A Y~ + B U~ - F).
  Matrix predict_multiplier(const Iterate& w, const Matrix& controls, const Matrix& states) const {
    return w.lambda - cfg_.beta * constraint_residual(sys_, states, controls, cfg_.threads);
  }

  /// One prediction sweep; every block reads the same w^k and q^k.
  Iterate predict(const Iterate& w) const {
    detail::check_iterate(sys_, w, "predict");
    if (w.has_box() != box()) throw std::invalid_argument("predict: iterate does not match solver variant");
    const Matrix q = compute_q(w);
    Iterate p;
    p.controls = predict_controls(w, q);
    p.states = predict_states(w, q);
    p.lambda = predict_multiplier(w, p.controls, p.states);
    if (box()) {
      p.box_states = predict_box_states(w);
      p.box_lambda = w.box_lambda - (cfg_.beta * copy_scale_) * (p.states - p.box_states);
    }
    return p;
  }

  SolveResult solve(Iterate start, const Observer& observer = {}) const {
    detail::check_iterate(sys_, start, "solve");
    if (start.has_box() != box()) throw std::invalid_argument("solve: iterate does not match solver variant");
    const auto begin = Clock::now();
    SolveResult result;
    SolveReport& rep = result.report;
    rep.nu = nu_;
    rep.seconds_setup = seconds_setup_;
    Iterate w = std::move(start);
    for (int k = 0; k < cfg_.max_iterations; ++k) {
      auto t0 = Clock::now();
      const Iterate predicted = predict(w);
      rep.seconds_predict += seconds_since(t0);

      t0 = Clock::now();
      Iterate next = correct(w, predicted, nu_);
      const double increment = h_norm_sq(difference(w, next));
      rep.seconds_correct += seconds_since(t0);

      rep.increment_history.push_back(increment);
      if (box()) rep.box_gap_history.push_back((next.states - next.box_states).norm());
      rep.iterations = k + 1;
      if (observer) observer(k, next, increment);
      w = std::move(next);
      if (cfg_.stop_on_tolerance && increment <= cfg_.epsilon) {
        rep.converged = true;
        break;
      }
    }
    rep.constraint_residual = constraint_residual(sys_, w.states, w.controls, cfg_.threads).norm();
    rep.seconds_total = seconds_since(begin) + seconds_setup_;
    result.iterate = std::move(w);
    return result;
  }

  SolveResult solve(const Observer& observer = {}) const { return solve(initial_iterate(), observer); }

 private:
  using Clock = std::chrono::steady_clock;

  static double seconds_since(Clock::time_point t) {
    return std::chrono::duration<double>(Clock::now() - t).count();
  }

  Matrix project(const Matrix& x) const {
    return x.cwiseMax(cfg_.bounds->lower).cwiseMin(cfg_.bounds->upper);
  }

  const DiscreteSystem& sys_;
  SolverConfig cfg_;
  double nu_ = 0.0;
  double copy_scale_ = 1.0;
  double seconds_setup_ = 0.0;
  CholFactor control_factor_;
  CholFactor state_factor_;
  CholFactor terminal_factor_;
};

/// Equality-constrained solve; any bounds in the configuration are ignored.
inline SolveResult solve(const DiscreteSystem& sys, SolverConfig config) {
  config.bounds.reset();
  return SplittingSolver(sys, std::move(config)).solve();
}

/// Solve with the state box constraint handled through an auxiliary copy P.
inline SolveResult solve_box(const DiscreteSystem& sys, const SolverConfig& config) {
  if (!config.bounds) throw std::invalid_argument("solve_box: bounds are required");
  return SplittingSolver(sys, config).solve();
}

}  // namespace parasplit
