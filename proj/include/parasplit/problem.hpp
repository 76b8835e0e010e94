#pragma once

#include <functional>
#include <string>

#include "fem.hpp"
#include "mesh.hpp"

namespace parasplit {

using SpaceTimeFunction = std::function<double(Point, double)>;

/// Linear-quadratic parabolic control problem on the unit square:
///   min 1/2 |y - y_d|^2_{L2(Q)} + alpha/2 |u|^2_{L2(Q)}
///   s.t. y_t - Laplace(y) = f + u,  K y = 0 on the boundary,  y(0) = y_0.
/// exact_state and exact_control are set only for manufactured solutions.
struct ManufacturedProblem {
  std::string name;
  double final_time = 1.0;
  BoundaryCondition bc = BoundaryCondition::Dirichlet;
  SpaceTimeFunction source;
  SpaceTimeFunction desired_state;
  SpatialFunction initial_state;
  SpaceTimeFunction exact_state;
  SpaceTimeFunction exact_control;
  double alpha = 1e-2;
  double beta = 10.0;

  bool has_exact_solution() const { return static_cast<bool>(exact_state) && static_cast<bool>(exact_control); }
};

inline SpatialFunction at_time(const SpaceTimeFunction& g, double t) {
  return [g, t](Point p) { return g(p, t); };
}

}  // namespace parasplit
