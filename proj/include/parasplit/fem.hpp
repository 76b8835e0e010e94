#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "mesh.hpp"
#include "sparse.hpp"

namespace parasplit {

using SpatialFunction = std::function<double(Point)>;

class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, Point where)
      : std::runtime_error(what + " at (" + format(where) + ")"), where_(where) {}

  Point where() const { return where_; }

 private:
  static std::string format(Point p) {
    std::ostringstream os;
    os.precision(17);
    os << p.x1 << ", " << p.x2;
    return os.str();
  }

  Point where_;
};

/// Continuous piecewise-linear space on a mesh with its unknown numbering.
struct FemSpace {
  std::shared_ptr<const TriMesh> mesh;
  DofMap dofs;

  FemSpace() = default;
  FemSpace(std::shared_ptr<const TriMesh> m, BoundaryCondition bc)
      : mesh(std::move(m)), dofs(node_classification(*mesh, bc)) {}

  BoundaryCondition bc() const { return dofs.bc; }
  Index size() const { return static_cast<Index>(dofs.size()); }
  Point dof_point(Index d) const { return mesh->nodes[dofs.dof_to_node[d]]; }
};

inline FemSpace make_space(int subdivisions, BoundaryCondition bc) {
  return FemSpace(std::make_shared<const TriMesh>(uniform_unit_square(subdivisions)), bc);
}

namespace detail {

struct ElementGeometry {
  std::array<Point, 3> vertices;
  double area = 0.0;
  // gradients of the three barycentric coordinates
  std::array<std::array<double, 2>, 3> grad{};
};

inline ElementGeometry geometry(const std::array<Point, 3>& vertices) {
  ElementGeometry g;
  g.vertices = vertices;
  const Point& p0 = g.vertices[0];
  const Point& p1 = g.vertices[1];
  const Point& p2 = g.vertices[2];
  const double det = (p1.x1 - p0.x1) * (p2.x2 - p0.x2) - (p2.x1 - p0.x1) * (p1.x2 - p0.x2);
  g.area = 0.5 * det;
  g.grad[0] = {(p1.x2 - p2.x2) / det, (p2.x1 - p1.x1) / det};
  g.grad[1] = {(p2.x2 - p0.x2) / det, (p0.x1 - p2.x1) / det};
  g.grad[2] = {(p0.x2 - p1.x2) / det, (p1.x1 - p0.x1) / det};
  return g;
}

inline ElementGeometry geometry(const TriMesh& mesh, const Triangle& t) {
  return geometry({mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]});
}

}  // namespace detail

/// Three-point edge-midpoint rule; exact for quadratics on a triangle.
struct EdgeMidpointRule {
  static constexpr int size = 3;
  // barycentric coordinates of the quadrature points
  static constexpr std::array<std::array<double, 3>, 3> points{{
      {0.5, 0.5, 0.0},
      {0.0, 0.5, 0.5},
      {0.5, 0.0, 0.5},
  }};
  static constexpr double weight = 1.0 / 3.0;  // times element area
};

inline Point barycentric_point(const std::array<Point, 3>& v, const std::array<double, 3>& l) {
  return {l[0] * v[0].x1 + l[1] * v[1].x1 + l[2] * v[2].x1,
          l[0] * v[0].x2 + l[1] * v[1].x2 + l[2] * v[2].x2};
}

inline Eigen::Matrix3d local_mass(const std::array<Point, 3>& v) {
  const double area =
      0.5 * ((v[1].x1 - v[0].x1) * (v[2].x2 - v[0].x2) - (v[2].x1 - v[0].x1) * (v[1].x2 - v[0].x2));
  Eigen::Matrix3d m;
  m << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  return (area / 12.0) * m;
}

inline Eigen::Matrix3d local_stiffness(const std::array<Point, 3>& v) {
  const auto g = detail::geometry(v);
  Eigen::Matrix3d k;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      k(a, b) = g.area * (g.grad[a][0] * g.grad[b][0] + g.grad[a][1] * g.grad[b][1]);
    }
  }
  return k;
}

namespace detail {

template <class LocalMatrix>
SparseMatrix assemble(const FemSpace& space, LocalMatrix&& local) {
  const TriMesh& mesh = *space.mesh;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(9 * mesh.num_elements());
  for (const Triangle& t : mesh.elements) {
    const std::array<Point, 3> v{mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]};
    const Eigen::Matrix3d k = local(v);
    for (int a = 0; a < 3; ++a) {
      const int ra = space.dofs.node_to_dof[t[a]];
      if (ra < 0) continue;
      for (int b = 0; b < 3; ++b) {
        const int cb = space.dofs.node_to_dof[t[b]];
        if (cb < 0) continue;
        triplets.emplace_back(ra, cb, k(a, b));
      }
    }
  }
  SparseMatrix m(space.size(), space.size());
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.makeCompressed();
  return m;
}

inline double checked(const SpatialFunction& g, Point p) {
  const double v = g(p);
  if (!std::isfinite(v)) throw EvaluationError("non-finite function value", p);
  return v;
}

}  // namespace detail

/// Mass matrix (phi_j, phi_k) over the space's unknowns.
inline SparseMatrix assemble_mass(const FemSpace& space) {
  return detail::assemble(space, [](const auto& v) { return local_mass(v); });
}

/// Stiffness matrix (grad phi_j, grad phi_k) over the space's unknowns.
inline SparseMatrix assemble_stiffness(const FemSpace& space) {
  return detail::assemble(space, [](const auto& v) { return local_stiffness(v); });
}

/// Entry k is scale * (g, phi_k) evaluated with the edge-midpoint rule.
inline Vector load_vector(const FemSpace& space, const SpatialFunction& g, double scale = 1.0) {
  const TriMesh& mesh = *space.mesh;
  Vector out = Vector::Zero(space.size());
  for (const Triangle& t : mesh.elements) {
    const auto geo = detail::geometry(mesh, t);
    for (const auto& l : EdgeMidpointRule::points) {
      const double gv = detail::checked(g, barycentric_point(geo.vertices, l));
      const double w = EdgeMidpointRule::weight * geo.area * gv;
      for (int a = 0; a < 3; ++a) {
        const int d = space.dofs.node_to_dof[t[a]];
        if (d >= 0) out(d) += scale * w * l[a];
      }
    }
  }
  return out;
}

/// Nodal interpolant: value of g at every unknown's node.
inline Vector interpolate_nodal(const FemSpace& space, const SpatialFunction& g) {
  Vector out(space.size());
  for (Index d = 0; d < space.size(); ++d) out(d) = detail::checked(g, space.dof_point(d));
  return out;
}

/// Squared L2(Omega) norm of (sum_k coeffs_k phi_k - g). An empty g means zero.
inline double l2_error_sq(const FemSpace& space, const Vector& coeffs, const SpatialFunction& g) {
  require_same_size(space.size(), coeffs.size(), "l2_error");
  const TriMesh& mesh = *space.mesh;
  double acc = 0.0;
  for (const Triangle& t : mesh.elements) {
    const auto geo = detail::geometry(mesh, t);
    std::array<double, 3> nodal{};
    for (int a = 0; a < 3; ++a) {
      const int d = space.dofs.node_to_dof[t[a]];
      nodal[a] = d >= 0 ? coeffs(d) : 0.0;
    }
    double local = 0.0;
    for (const auto& l : EdgeMidpointRule::points) {
      const double uh = l[0] * nodal[0] + l[1] * nodal[1] + l[2] * nodal[2];
      const double gv = g ? detail::checked(g, barycentric_point(geo.vertices, l)) : 0.0;
      local += (uh - gv) * (uh - gv);
    }
    acc += EdgeMidpointRule::weight * geo.area * local;
  }
  return acc;
}

inline double l2_error(const FemSpace& space, const Vector& coeffs, const SpatialFunction& g) {
  return std::sqrt(l2_error_sq(space, coeffs, g));
}

}  // namespace parasplit
