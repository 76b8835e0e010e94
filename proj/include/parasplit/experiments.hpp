#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "discretization.hpp"
#include "fem.hpp"
#include "kkt.hpp"
#include "problem.hpp"
#include "splitting.hpp"

namespace parasplit {

// ---------------------------------------------------------------------------
// Manufactured problems

/// Dirichlet problem on (0,1)^2 x (0,2) with
///   y* = cos(pi t) sin(pi x1) sin(pi x2),  u* = sin(pi t) sin(pi x1) sin(pi x2).
/// The source carries the spatial factor sin(pi x1) sin(pi x2) so that
/// y*_t - Laplace(y*) = f + u* holds.
inline ManufacturedProblem example_5_1(double alpha = 1e-2) {
  using std::numbers::pi;
  auto shape = [](Point p) { return std::sin(pi * p.x1) * std::sin(pi * p.x2); };
  ManufacturedProblem p;
  p.name = "5.1";
  p.final_time = 2.0;
  p.bc = BoundaryCondition::Dirichlet;
  p.alpha = alpha;
  p.beta = 10.0;
  p.exact_state = [shape](Point x, double t) { return std::cos(pi * t) * shape(x); };
  p.exact_control = [shape](Point x, double t) { return std::sin(pi * t) * shape(x); };
  p.source = [shape](Point x, double t) {
    return (2.0 * pi * pi * std::cos(pi * t) - pi * std::sin(pi * t) - std::sin(pi * t)) * shape(x);
  };
  p.desired_state = [shape, alpha](Point x, double t) {
    return (std::cos(pi * t) - alpha * pi * std::cos(pi * t) + 2.0 * alpha * pi * pi * std::sin(pi * t)) *
           shape(x);
  };
  p.initial_state = [shape](Point x) { return shape(x); };
  return p;
}

/// Coefficients c_1..c_12 (index 0..11) of the Neumann example.
inline std::array<double, 12> example_5_2_coefficients(double alpha) {
  using std::numbers::pi;
  const double e = std::exp(pi * pi / 3.0);
  const double pi4 = pi * pi * pi * pi;
  std::array<double, 12> c{};
  c[0] = 5.0 * (5.0 / e - 6.0) / (6.0 - 7.0 * e);
  c[1] = 5.0;
  c[2] = (7.0 + 141.0 * e + 7.0 * e * e - 6.0 - 106.0 / e) / (4.0 * (6.0 - 7.0 * e));
  c[3] = c[4] = c[5] = 0.25;
  c[6] = 5.0 * (9.0 + 35.0 * alpha * pi4) * (5.0 / e - 6.0) / (9.0 * (6.0 - 7.0 * e));
  c[7] = 5.0 + 175.0 / 9.0 * alpha * pi4;
  c[9] = c[10] = c[11] = 0.25 + alpha * pi4;
  c[8] = 4.0 * c[2] * c[9];
  return c;
}

/// Neumann problem on (0,1)^2 x (0,1) with f = 0, built from
/// w_a = exp(pi^2 t / 3) cos(pi x1) cos(pi x2) and w_b = exp(-pi^2 t / 3) cos(pi x1) cos(pi x2).
/// The exact control is u* = pi^2/3 (c1 w_a - c2 w_b) + 2 pi^2 y*, which is
/// what y*_t - Laplace(y*) = u* requires.
inline ManufacturedProblem example_5_2(double alpha = 1e-3) {
  using std::numbers::pi;
  const auto c = example_5_2_coefficients(alpha);
  constexpr double T = 1.0;
  constexpr double rate = pi * pi / 3.0;
  auto shape = [](Point p) { return std::cos(pi * p.x1) * std::cos(pi * p.x2); };
  // combination k1 w_a(t) + k2 w_b(t) + k3 w_a(0) + k4 w_b(0) + k5 w_a(T) + k6 w_b(T)
  auto combo = [shape](double k1, double k2, double k3, double k4, double k5, double k6) {
    const double fixed = k3 + k4 + k5 * std::exp(rate * T) + k6 * std::exp(-rate * T);
    return [=](Point x, double t) {
      return (k1 * std::exp(rate * t) + k2 * std::exp(-rate * t) + fixed) * shape(x);
    };
  };
  ManufacturedProblem p;
  p.name = "5.2";
  p.final_time = T;
  p.bc = BoundaryCondition::Neumann;
  p.alpha = alpha;
  p.beta = 100.0;
  p.exact_state = combo(c[0], c[1], c[2], c[3], c[4], c[5]);
  p.desired_state = combo(c[6], c[7], c[8], c[9], c[10], c[11]);
  const double lap = 2.0 * pi * pi;
  p.exact_control = combo(c[0] * (rate + lap), c[1] * (lap - rate), lap * c[2], lap * c[3], lap * c[4], lap * c[5]);
  p.source = [](Point, double) { return 0.0; };
  auto y = p.exact_state;
  p.initial_state = [y](Point x) { return y(x, 0.0); };
  return p;
}

inline ManufacturedProblem example_by_name(const std::string& name, std::optional<double> alpha = {}) {
  if (name == "5.1") return alpha ? example_5_1(*alpha) : example_5_1();
  if (name == "5.2") return alpha ? example_5_2(*alpha) : example_5_2();
  throw std::invalid_argument("unknown example '" + name + "' (expected 5.1 or 5.2)");
}

/// Step count giving tau = 1/n on the horizon of the problem.
inline int steps_for_level(const ManufacturedProblem& problem, int n) {
  return std::max(1, static_cast<int>(std::lround(n * problem.final_time)));
}

inline DiscreteSystem build_level(const ManufacturedProblem& problem, int n) {
  return build_system(problem, make_space(n, problem.bc), TimeGrid(problem.final_time, steps_for_level(problem, n)));
}

// ---------------------------------------------------------------------------
// Error norms

inline void require_exact(const ManufacturedProblem& problem) {
  if (!problem.has_exact_solution()) {
    throw std::invalid_argument("problem '" + problem.name + "' has no exact solution");
  }
}

/// |R_x Y_M - y*(., T)|_{L2(Omega)}.
inline double error_y_final(const FemSpace& space, const Vector& final_state, const ManufacturedProblem& problem) {
  require_exact(problem);
  return l2_error(space, final_state, at_time(problem.exact_state, problem.final_time));
}

/// Behaviour of the temporal control interpolant on [0, t_{1/2}] and
/// [t_{M-1/2}, T], outside the range of the midpoint snapshots.
enum class EndExtension { Linear, Constant };

/// Piecewise-linear-in-time interpolant of midpoint control snapshots,
/// evaluated at time t as a coefficient vector.
inline Vector interpolate_controls(const TimeGrid& grid, const Matrix& controls, double t,
                                   EndExtension ends = EndExtension::Linear) {
  const int M = grid.steps;
  const double tau = grid.tau();
  if (M == 1) return controls.col(0);
  // position in units of tau relative to the first midpoint
  const double s = t / tau - 0.5;
  int left = static_cast<int>(std::floor(s));
  if (s < 0.0 || s > M - 1) {
    if (ends == EndExtension::Constant) return controls.col(s < 0.0 ? 0 : M - 1);
  }
  left = std::clamp(left, 0, M - 2);
  const double theta = s - left;
  return (1.0 - theta) * controls.col(left) + theta * controls.col(left + 1);
}

/// |Pi_t R_x U - u*|_{L2(Q_T)} with two-point Gauss quadrature on every
/// piece of the temporal interpolant.
inline double error_u_spacetime(const FemSpace& space, const TimeGrid& grid, const Matrix& controls,
                                 const ManufacturedProblem& problem, EndExtension ends = EndExtension::Linear) {
  require_exact(problem);
  require_same_size(space.size(), controls.rows(), "error_u_spacetime");
  require_same_size(grid.steps, controls.cols(), "error_u_spacetime");
  const int M = grid.steps;
  std::vector<double> breaks{0.0};
  for (int m = 1; m <= M; ++m) breaks.push_back(grid.midpoint(m));
  breaks.push_back(grid.final_time);
  const double g = 1.0 / std::sqrt(3.0);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double a = breaks[i];
    const double b = breaks[i + 1];
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    for (double node : {mid - half * g, mid + half * g}) {
      const Vector c = interpolate_controls(grid, controls, node, ends);
      acc += half * l2_error_sq(space, c, at_time(problem.exact_control, node));
    }
  }
  return std::sqrt(acc);
}

// ---------------------------------------------------------------------------
// Convergence study

enum class SolveMode { Oracle, Splitting };

struct ConvergenceRow {
  int level = 0;  // cells per side
  double h = 0.0;
  double tau = 0.0;
  Index dof = 0;
  double err_y_final = 0.0;
  double err_u_spacetime = 0.0;
  std::optional<double> order_y;
  std::optional<double> order_u;
  int iterations = 0;  // splitting mode only
};

inline std::optional<double> observed_order(double err_coarse, double err_fine, double h_coarse, double h_fine) {
  if (!(err_coarse > 0.0 && err_fine > 0.0)) return std::nullopt;
  return std::log(err_coarse / err_fine) / std::log(h_coarse / h_fine);
}

inline std::vector<ConvergenceRow> convergence_study(const ManufacturedProblem& problem, const std::vector<int>& levels,
                                                     const SolverConfig& config, SolveMode mode) {
  require_exact(problem);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 1 || (i > 0 && levels[i] <= levels[i - 1])) {
      throw std::invalid_argument("convergence_study: levels must be positive and ascending");
    }
  }
  std::vector<ConvergenceRow> rows;
  for (int n : levels) {
    const DiscreteSystem sys = build_level(problem, n);
    ConvergenceRow row;
    row.level = n;
    row.h = sys.space.mesh->h;
    row.tau = sys.tau();
    row.dof = sys.dofs();
    Matrix states, controls;
    if (mode == SolveMode::Oracle) {
      const KktSolution sol = solve_kkt(sys);
      states = sol.states;
      controls = sol.controls;
    } else {
      SolverConfig cfg = config;
      cfg.bounds.reset();
      const SolveResult res = SplittingSolver(sys, cfg).solve();
      states = res.iterate.states;
      controls = res.iterate.controls;
      row.iterations = res.report.iterations;
    }
    row.err_y_final = error_y_final(sys.space, states.col(sys.steps() - 1), problem);
    row.err_u_spacetime = error_u_spacetime(sys.space, sys.grid, controls, problem);
    if (!rows.empty()) {
      const ConvergenceRow& prev = rows.back();
      row.order_y = observed_order(prev.err_y_final, row.err_y_final, prev.h, row.h);
      row.order_u = observed_order(prev.err_u_spacetime, row.err_u_spacetime, prev.h, row.h);
    }
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Iteration history

struct IterationRecord {
  int k = 0;                            // iterate index, starting at 1 for the initial iterate
  std::optional<double> hnorm_to_star;  // |w^k - w*|_H, absent when no oracle is available
  double hnorm_increment_sq = 0.0;      // |w^k - w^{k+1}|_H^2
};

inline std::vector<IterationRecord> iteration_history(const DiscreteSystem& sys, const SolverConfig& config,
                                                      Index oracle_cap = default_kkt_cap) {
  SolverConfig cfg = config;
  cfg.bounds.reset();
  std::optional<Iterate> star;
  try {
    star = solve_kkt(sys, oracle_cap).as_iterate();
  } catch (const KktError&) {
    star.reset();
  }
  const SplittingSolver solver(sys, cfg);
  Iterate w = solver.initial_iterate();
  auto distance = [&](const Iterate& x) -> std::optional<double> {
    if (!star) return std::nullopt;
    return std::sqrt(h_norm_sq(sys, difference(x, *star), cfg.beta, cfg.threads));
  };
  std::vector<IterationRecord> records;
  std::optional<double> current = distance(w);
  solver.solve(w, [&](int k, const Iterate& next, double increment) {
    records.push_back({k + 1, current, increment});
    current = distance(next);
  });
  return records;
}

// ---------------------------------------------------------------------------
// Box-constrained run

struct BoxRecord {
  int k = 0;
  double hnorm_increment_sq = 0.0;
  double state_gap = 0.0;  // |Y - P|
  double state_norm = 0.0;  // |Y|
  double min_box_state = 0.0;
  double max_box_state = 0.0;
};

struct BoxRun {
  SolveResult result;
  std::vector<BoxRecord> records;
};

inline BoxRun run_box(const DiscreteSystem& sys, const SolverConfig& config) {
  if (!config.bounds) throw std::invalid_argument("run_box: bounds are required");
  const SplittingSolver solver(sys, config);
  BoxRun run;
  run.result = solver.solve([&](int k, const Iterate& next, double increment) {
    run.records.push_back({k + 1, increment, (next.states - next.box_states).norm(), next.states.norm(),
                           next.box_states.minCoeff(), next.box_states.maxCoeff()});
  });
  return run;
}

// ---------------------------------------------------------------------------
// Thread-scaling benchmark

struct BenchmarkRow {
  int threads = 1;
  double seconds_total = 0.0;
  double seconds_predict = 0.0;
  double seconds_correct = 0.0;
  double psf = 1.0;
};

struct BenchmarkReport {
  std::vector<BenchmarkRow> rows;
  bool identical = true;  // iterates agree bit-for-bit across thread counts
};

/// Runs exactly `iterations` steps per thread count; the speedup factor is
/// serial time over parallel time, with the serial run as baseline.
inline BenchmarkReport benchmark(const DiscreteSystem& sys, const SolverConfig& config, int iterations,
                                 const std::vector<int>& thread_counts) {
  if (iterations < 1) throw std::invalid_argument("benchmark: iteration count must be positive");
  auto run = [&](int threads) {
    SolverConfig cfg = config;
    cfg.bounds.reset();
    cfg.threads = threads;
    cfg.max_iterations = iterations;
    cfg.epsilon = 0.0;
    cfg.stop_on_tolerance = false;
    return SplittingSolver(sys, cfg).solve();
  };
  const SolveResult serial = run(1);
  BenchmarkReport report;
  for (int threads : thread_counts) {
    const SolveResult res = threads == 1 ? serial : run(threads);
    BenchmarkRow row;
    row.threads = threads;
    row.seconds_total = res.report.seconds_total;
    row.seconds_predict = res.report.seconds_predict;
    row.seconds_correct = res.report.seconds_correct;
    row.psf = threads == 1 ? 1.0 : serial.report.seconds_total / res.report.seconds_total;
    report.identical = report.identical && res.iterate.controls == serial.iterate.controls &&
                       res.iterate.states == serial.iterate.states && res.iterate.lambda == serial.iterate.lambda &&
                       res.report.increment_history == serial.report.increment_history;
    report.rows.push_back(row);
  }
  return report;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* convergence_csv_header = "level,h,tau,dof,err_y_final,err_u_spacetime,order_y,order_u";
inline constexpr const char* iteration_csv_header = "k,hnorm_to_star,hnorm_increment_sq";
inline constexpr const char* benchmark_csv_header = "threads,seconds_total,seconds_predict,seconds_correct,psf";
inline constexpr const char* box_csv_header =
    "k,hnorm_increment_sq,state_gap,state_norm,min_box_state,max_box_state";

inline std::string format_number(double v) {
  std::ostringstream os;
  os.precision(16);
  os << v;
  return os.str();
}

inline std::string format_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

inline void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows) {
  os << convergence_csv_header << '\n';
  for (const auto& r : rows) {
    os << r.level << ',' << format_number(r.h) << ',' << format_number(r.tau) << ',' << r.dof << ','
       << format_number(r.err_y_final) << ',' << format_number(r.err_u_spacetime) << ',' << format_number(r.order_y)
       << ',' << format_number(r.order_u) << '\n';
  }
}

inline void write_iteration_csv(std::ostream& os, const std::vector<IterationRecord>& rows) {
  os << iteration_csv_header << '\n';
  for (const auto& r : rows) {
    os << r.k << ',' << format_number(r.hnorm_to_star) << ',' << format_number(r.hnorm_increment_sq) << '\n';
  }
}

inline void write_benchmark_csv(std::ostream& os, const std::vector<BenchmarkRow>& rows) {
  os << benchmark_csv_header << '\n';
  for (const auto& r : rows) {
    os << r.threads << ',' << format_number(r.seconds_total) << ',' << format_number(r.seconds_predict) << ','
       << format_number(r.seconds_correct) << ',' << format_number(r.psf) << '\n';
  }
}

inline void write_box_csv(std::ostream& os, const std::vector<BoxRecord>& rows) {
  os << box_csv_header << '\n';
  for (const auto& r : rows) {
    os << r.k << ',' << format_number(r.hnorm_increment_sq) << ',' << format_number(r.state_gap) << ','
       << format_number(r.state_norm) << ',' << format_number(r.min_box_state) << ','
       << format_number(r.max_box_state) << '\n';
  }
}

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::optional<double> parse_optional(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

}  // namespace detail

inline std::vector<ConvergenceRow> read_convergence_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != convergence_csv_header) {
    throw std::runtime_error("read_convergence_csv: unexpected header");
  }
  std::vector<ConvergenceRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_fields(line);
    if (f.size() != 8) throw std::runtime_error("read_convergence_csv: malformed row '" + line + "'");
    ConvergenceRow r;
    r.level = std::stoi(f[0]);
    r.h = std::stod(f[1]);
    r.tau = std::stod(f[2]);
    r.dof = std::stol(f[3]);
    r.err_y_final = std::stod(f[4]);
    r.err_u_spacetime = std::stod(f[5]);
    r.order_y = detail::parse_optional(f[6]);
    r.order_u = detail::parse_optional(f[7]);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace parasplit
