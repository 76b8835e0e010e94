// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "dense_oracle.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace parasplit;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

Iterate primal_dual(const Iterate& w) { return Iterate{w.controls, w.states, w.lambda, Matrix(), Matrix()}; }

DiscreteSystem instance(const ManufacturedProblem& p, int n, int M) {
  return build_system(p, make_space(n, p.bc), TimeGrid(p.final_time, M));
}

Outcome discretization_order() {
  Outcome o;
  std::ostringstream d;
  for (const auto& p : {example_5_1(), example_5_2()}) {
    const auto rows = convergence_study(p, {4, 8, 16, 32}, SolverConfig{}, SolveMode::Oracle);
    d << p.name << " orders y/u:";
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double oy = rows[i].order_y.value_or(0.0);
      const double ou = rows[i].order_u.value_or(0.0);
      d << ' ' << fmt(oy) << '/' << fmt(ou);
      for (double v : {oy, ou}) o.pass = o.pass && v >= 1.8 && v <= 2.2;
    }
    d << "; ";
  }
  o.detail = d.str();
  return o;
}

// Criteria 2 and 3 share one run.
std::pair<Outcome, Outcome> contraction_and_rate() {
  const auto p = example_5_1();
  const DiscreteSystem sys = instance(p, 8, 16);
  SolverConfig c;
  c.beta = 10.0;
  c.gamma = 1.0;
  c.epsilon = 0.0;
  c.max_iterations = 2001;
  const SplittingSolver s(sys, c);
  const Iterate star = solve_kkt(sys).as_iterate();
  Iterate current = s.initial_iterate();
  const double d0 = h_norm_sq(sys, difference(current, star), c.beta);
  const double slack = 1e-10 * d0;
  const double factor = (2.0 - c.gamma) / c.gamma;
  int contraction_bad = 0, rate_bad = 0;
  double worst_contraction = -1e300, worst_rate = 0.0;
  s.solve(current, [&](int k, const Iterate& next, double increment) {
    const double before = h_norm_sq(sys, difference(current, star), c.beta);
    const double after = h_norm_sq(sys, difference(next, star), c.beta);
    const double excess = after - (before - factor * increment);
    worst_contraction = std::max(worst_contraction, excess / d0);
    if (excess > slack) ++contraction_bad;
    const double bound = 4.0 / (c.gamma * (2.0 - c.gamma) * (k + 1)) * d0;
    worst_rate = std::max(worst_rate, increment / bound);
    if (increment > bound + slack) ++rate_bad;
    current = next;
  });
  Outcome a{contraction_bad == 0, "violations " + std::to_string(contraction_bad) +
                                      " over k = 0..2000, max excess / |w0-w*|^2 = " + fmt(worst_contraction)};
  Outcome b{rate_bad == 0,
            "violations " + std::to_string(rate_bad) + ", max increment / bound = " + fmt(worst_rate)};
  return {a, b};
}

Outcome oracle_agreement() {
  Outcome o;
  std::ostringstream d;
  for (const auto& p : {example_5_1(), example_5_2()}) {
    const DiscreteSystem sys = instance(p, 4, 8);
    SolverConfig c;
    c.beta = p.beta;
    c.epsilon = 0.0;
    c.max_iterations = 100000;
    const SplittingSolver s(sys, c);
    const Iterate star = solve_kkt(sys).as_iterate();
    const double d0 = std::sqrt(h_norm_sq(sys, difference(s.initial_iterate(), star), c.beta));
    int reached = -1;
    double last = d0;
    try {
      s.solve([&](int k, const Iterate& next, double) {
        last = std::sqrt(h_norm_sq(sys, difference(next, star), c.beta));
        if (last <= 1e-6 * d0) {
          reached = k + 1;
          throw 0;  // done
        }
      });
    } catch (int) {
    }
    o.pass = o.pass && reached > 0;
    d << p.name << " (beta " << p.beta << "): "
      << (reached > 0 ? "reached at k = " + std::to_string(reached) : "ratio " + fmt(last / d0) + " at k = 1e5")
      << "; ";
  }
  o.detail = d.str();
  return o;
}

double relative_foc(const oracle::Separable& sep, const oracle::Block& b, const Iterate& w, const Iterate& pred,
                    double beta) {
  const Vector lambda = oracle::multipliers(sep, w);
  const Vector others = oracle::residual(sep, w) - b.column * oracle::block_value(b, w);
  const Vector z = oracle::block_value(b, pred);
  const Vector r = oracle::first_order_residual(sep, b, w, pred, beta);
  const double scale = (b.hessian * z).norm() + b.linear.norm() + (b.column.transpose() * lambda).norm() +
                       beta * (b.column.transpose() * (b.column * z)).norm() +
                       beta * (b.column.transpose() * others).norm();
  return r.norm() / std::max(scale, 1e-300);
}

Outcome prediction_exactness() {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  int checks = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + trial % 2;
    const int M = 1 + (trial / 2) % 3;
    const auto bc = trial % 12 < 6 ? BoundaryCondition::Dirichlet : BoundaryCondition::Neumann;
    const DiscreteSystem sys = oracle::random_system(n, M, bc, rng);
    SolverConfig c;
    c.beta = 0.1 + 20.0 * u(rng);
    const SplittingSolver s(sys, c);
    const auto sep = oracle::separable(sys);
    Iterate w = oracle::random_iterate(sys, rng);
    for (int k = 0; k < 25; ++k) {
      const Iterate pred = s.predict(w);
      for (const auto& b : sep.blocks) {
        worst = std::max(worst, relative_foc(sep, b, w, pred, c.beta));
        ++checks;
      }
      w = correct(w, pred, s.nu());
    }
  }
  return {worst <= 1e-9, std::to_string(checks) + " block checks, max relative residual " + fmt(worst)};
}

Outcome h_norm_correctness() {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  bool positive = true;
  int samples = 0;
  for (int M : {1, 2, 3}) {
    for (auto bc : {BoundaryCondition::Dirichlet, BoundaryCondition::Neumann}) {
      const DiscreteSystem sys = oracle::random_system(2, M, bc, rng);
      const double beta = 0.1 + 20.0 * u(rng);
      const auto sep = oracle::separable(sys);
      const Matrix H = oracle::h_matrix(sep, beta);
      for (int i = 0; i < 50; ++i) {
        const Iterate v = oracle::random_iterate(sys, rng);
        const Vector x = oracle::stack(sep, v);
        const double dense = x.dot(H * x);
        const double fast = h_norm_sq(sys, v, beta);
        worst = std::max(worst, std::abs(fast - dense) / dense);
        positive = positive && fast > 0.0;
        ++samples;
      }
    }
  }
  return {worst <= 1e-11 && positive,
          std::to_string(samples) + " samples, max relative gap " + fmt(worst) +
              (positive ? ", all positive" : ", nonpositive sample")};
}

Outcome box_variant() {
  const auto p = example_5_1();
  const DiscreteSystem sys = instance(p, 8, steps_for_level(p, 8));
  std::ostringstream d;

  SolverConfig c;
  c.beta = p.beta;
  c.max_iterations = 20000;
  c.bounds = Bounds{0.0, 0.8};
  const BoxRun run = run_box(sys, c);
  int outside = 0;
  for (const auto& r : run.records) outside += r.min_box_state < 0.0 || r.max_box_state > 0.8;
  const BoxRecord& last = run.records.back();
  const bool gap_ok = last.state_gap <= 1e-4 * last.state_norm;
  d << "[0,0.8]: " << run.records.size() << " iterations, iterations with P outside " << outside
    << ", |Y-P|/|Y| = " << fmt(last.state_gap / last.state_norm) << "; ";

  SolverConfig wide = c;
  wide.bounds = Bounds{-1e6, 1e6};
  wide.epsilon = 0.0;
  wide.max_iterations = 100000;
  const SolveResult loose = SplittingSolver(sys, wide).solve();
  const Iterate star = solve_kkt(sys).as_iterate();
  const double gap = std::sqrt(h_norm_sq(sys, difference(primal_dual(loose.iterate), star), c.beta));
  const double ref = std::sqrt(h_norm_sq(sys, star, c.beta));
  const bool match = gap <= 1e-6 * ref;
  d << "[-1e6,1e6] after 1e5 iterations: |w - w*|_H / |w*|_H = " << fmt(gap / ref);
  return {outside == 0 && gap_ok && match, d.str()};
}

Outcome determinism_and_speedup() {
  const auto p = example_5_1();
  const DiscreteSystem sys = build_level(p, 32);
  SolverConfig c;
  c.beta = p.beta;
  const BenchmarkReport r = benchmark(sys, c, 100, {1, 2, 4, 8});
  std::ostringstream d;
  d << (r.identical ? "identical iterates" : "ITERATES DIFFER") << "; PSF";
  for (const auto& row : r.rows) d << " t" << row.threads << '=' << fmt(row.psf);
  d << " (hardware threads: " << std::max(1u, std::thread::hardware_concurrency()) << ')';
  return {r.identical, d.str()};
}

Outcome objective_identity() {
  std::mt19937 rng(99);
  double worst = 0.0;
  int cases = 0;
  for (const auto& p : {example_5_1(), example_5_2()}) {
    for (int n = 2; n <= 4; ++n) {
      for (int M = 1; M <= 4; ++M) {
        const DiscreteSystem sys = instance(p, n, M);
        for (int t = 0; t < 5; ++t) {
          const Matrix Y = oracle::random_matrix(sys.dofs(), M, rng);
          const Matrix U = oracle::random_matrix(sys.dofs(), M, rng);
          const double quad = objective_quadrature(sys, Y, U);
          const double vec = objective_vec(sys, Y, U) + objective_constant(sys);
          worst = std::max(worst, std::abs(quad - vec) / std::abs(quad));
          ++cases;
        }
      }
    }
  }
  return {worst <= 1e-10, std::to_string(cases) + " trajectories, max relative gap " + fmt(worst)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& run) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
    std::fflush(stdout);
  };

  report(1, "discretization order", discretization_order);
  std::pair<Outcome, Outcome> cr{{false, "contraction run failed"}, {false, "contraction run failed"}};
  report(2, "contraction", [&] {
    cr = contraction_and_rate();
    return cr.first;
  });
  report(3, "rate bound", [&] { return cr.second; });
  report(4, "oracle agreement", oracle_agreement);
  report(5, "prediction exactness", prediction_exactness);
  report(6, "H-norm", h_norm_correctness);
  report(7, "box variant", box_variant);
  report(8, "determinism and speedup", determinism_and_speedup);
  report(9, "objective identity", objective_identity);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
