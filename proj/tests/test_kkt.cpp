#include "dense_oracle.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace parasplit;

namespace {

DiscreteSystem level(const ManufacturedProblem& p, int n, int M) {
  return build_system(p, make_space(n, p.bc), TimeGrid(p.final_time, M));
}

// Y driven forward by the state equation from a given control trajectory and
// zero initial data, so (dY, dU) stays in the null space of the constraint.
Matrix forward_states(const DiscreteSystem& sys, const Matrix& controls) {
  const CholFactor plus = factorize(sys.step_plus);
  Matrix y(sys.dofs(), sys.steps());
  Vector prev = Vector::Zero(sys.dofs());
  for (Index j = 0; j < sys.steps(); ++j) {
    Vector rhs = sys.step_minus * prev;
    rhs.noalias() += sys.tau() * (sys.mass * controls.col(j));
    y.col(j) = plus.solve(rhs);
    prev = y.col(j);
  }
  return y;
}

}  // namespace

TEST(Kkt, ZeroDataGivesZeroSolution) {
  auto p = example_5_1();
  p.source = [](Point, double) { return 0.0; };
  p.initial_state = [](Point) { return 0.0; };
  p.desired_state = [](Point, double) { return 0.0; };
  const KktSolution s = solve_kkt(level(p, 3, 3));
  EXPECT_LE(s.states.cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE(s.controls.cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE(s.lambda.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Kkt, ResidualsAreSmall) {
  for (const auto& p : {example_5_1(), example_5_2()}) {
    for (auto method : {KktMethod::Monolithic, KktMethod::Modal}) {
      const KktSolution s = solve_kkt(level(p, 4, 8), default_kkt_cap, method);
      EXPECT_LE(s.stationarity_residual, 1e-9);
      EXPECT_LE(s.feasibility_residual, 1e-9);
    }
  }
}

TEST(Kkt, MonolithicAndModalAgree) {
  std::mt19937 rng(1);
  for (auto bc : {BoundaryCondition::Dirichlet, BoundaryCondition::Neumann}) {
    for (int M : {1, 2, 5}) {
      const DiscreteSystem sys = oracle::random_system(4, M, bc, rng);
      const KktSolution a = solve_kkt(sys, default_kkt_cap, KktMethod::Monolithic);
      const KktSolution b = solve_kkt(sys, default_kkt_cap, KktMethod::Modal);
      EXPECT_LE((a.states - b.states).norm(), 1e-9 * (1.0 + a.states.norm()));
      EXPECT_LE((a.controls - b.controls).norm(), 1e-9 * (1.0 + a.controls.norm()));
      EXPECT_LE((a.lambda - b.lambda).norm(), 1e-9 * (1.0 + a.lambda.norm()));
    }
  }
}

TEST(Kkt, MatchesDenseNormalEquations) {
  std::mt19937 rng(2);
  const DiscreteSystem sys = oracle::random_system(3, 3, BoundaryCondition::Neumann, rng);
  const auto sep = oracle::separable(sys);
  // stack [H -C^T; C 0] densely from the block columns
  Index primal = 0;
  for (const auto& b : sep.blocks) primal += b.column.cols();
  Matrix K = Matrix::Zero(primal + sep.rows, primal + sep.rows);
  Vector rhs = Vector::Zero(primal + sep.rows);
  Index c = 0;
  for (const auto& b : sep.blocks) {
    const Index w = b.column.cols();
    K.block(c, c, w, w) = b.hessian;
    K.block(c, primal, w, sep.rows) = -b.column.transpose();
    K.block(primal, c, sep.rows, w) = b.column;
    rhs.segment(c, w) = b.linear;
    c += w;
  }
  rhs.tail(sep.rows) = sep.rhs;
  const Vector x = K.fullPivLu().solve(rhs);
  const KktSolution s = solve_kkt(sys);
  Iterate dense = Iterate::zeros(sys);
  c = 0;
  for (const auto& b : sep.blocks) {
    oracle::set_block(b, dense, x.segment(c, b.column.cols()));
    c += b.column.cols();
  }
  oracle::set_multipliers(sep, dense, x.tail(sep.rows));
  EXPECT_LE((s.states - dense.states).norm(), 1e-10 * dense.states.norm());
  EXPECT_LE((s.controls - dense.controls).norm(), 1e-10 * dense.controls.norm());
  EXPECT_LE((s.lambda - dense.lambda).norm(), 1e-10 * dense.lambda.norm());
}

TEST(Kkt, FeasibleDirectionsDoNotDecreaseTheObjective) {
  const DiscreteSystem sys = level(example_5_1(), 4, 8);
  const KktSolution s = solve_kkt(sys);
  const double best = objective_vec(sys, s.states, s.controls);
  std::mt19937 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const double scale = std::pow(10.0, -3.0 + trial % 4);
    const Matrix du = oracle::random_matrix(sys.dofs(), sys.steps(), rng, scale);
    const Matrix dy = forward_states(sys, du);
    ASSERT_LE(constraint_residual(sys, s.states + dy, s.controls + du).norm(),
              1e-10 * (1.0 + sys.rhs.norm()));
    EXPECT_GE(objective_vec(sys, s.states + dy, s.controls + du), best - 1e-12 * std::abs(best));
  }
}

TEST(Kkt, LinearInData) {
  std::mt19937 rng(4);
  DiscreteSystem sys = oracle::random_system(4, 4, BoundaryCondition::Dirichlet, rng);
  const KktSolution a = solve_kkt(sys);
  for (double factor : {-2.0, 0.5, 7.0}) {
    DiscreteSystem scaled = sys;
    scaled.rhs *= factor;
    scaled.desired_load *= factor;
    const KktSolution b = solve_kkt(scaled);
    EXPECT_LE((b.states - factor * a.states).norm(), 1e-10 * std::abs(factor) * a.states.norm());
    EXPECT_LE((b.controls - factor * a.controls).norm(), 1e-10 * std::abs(factor) * a.controls.norm());
  }
}

TEST(Kkt, ControlIsScaledMultiplier) {
  const DiscreteSystem sys = level(example_5_2(), 3, 3);
  const KktSolution s = solve_kkt(sys);
  EXPECT_LE((s.controls + s.lambda / sys.alpha).norm(), 1e-9 * s.controls.norm());
}

TEST(Kkt, CapIsEnforced) {
  const DiscreteSystem sys = level(example_5_1(), 4, 8);
  EXPECT_THROW(solve_kkt(sys, 3 * sys.dofs() * sys.steps() - 1), KktError);
  EXPECT_NO_THROW(solve_kkt(sys, 3 * sys.dofs() * sys.steps()));
}

TEST(Kkt, ResidualHelperFlagsPerturbation) {
  const DiscreteSystem sys = level(example_5_1(), 3, 4);
  const KktSolution s = solve_kkt(sys);
  Matrix y = s.states;
  y(0, 0) += 1e-3;
  const auto [stat, feas] = kkt_residuals(sys, y, s.controls, s.lambda);
  EXPECT_GT(stat, 1e-6);
  EXPECT_GT(feas, 1e-6);
}

TEST(Kkt, AgreesWithSplittingSolver) {
  const DiscreteSystem sys = level(example_5_1(), 3, 4);
  SolverConfig c;
  c.epsilon = 1e-24;
  c.max_iterations = 200000;
  const SolveResult r = solve(sys, c);
  const KktSolution s = solve_kkt(sys);
  EXPECT_LE((r.iterate.states - s.states).norm(), 1e-6 * s.states.norm());
  EXPECT_LE((r.iterate.controls - s.controls).norm(), 1e-6 * s.controls.norm());
}
