#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace parasplit {

enum class BoundaryCondition { Dirichlet, Neumann };

inline const char* to_string(BoundaryCondition bc) {
  return bc == BoundaryCondition::Dirichlet ? "dirichlet" : "neumann";
}

struct Point {
  double x1 = 0.0;
  double x2 = 0.0;
};

using Triangle = std::array<int, 3>;

/// Conforming triangulation of the unit square. Elements are stored with
/// counterclockwise vertex order.
struct TriMesh {
  std::vector<Point> nodes;
  std::vector<Triangle> elements;
  std::vector<int> boundary_nodes;
  std::vector<int> interior_nodes;
  double h = 0.0;        // maximum element diameter
  int subdivisions = 0;  // cells per side

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_elements() const { return elements.size(); }

  double signed_area(const Triangle& t) const {
    const Point& a = nodes[t[0]];
    const Point& b = nodes[t[1]];
    const Point& c = nodes[t[2]];
    return 0.5 * ((b.x1 - a.x1) * (c.x2 - a.x2) - (c.x1 - a.x1) * (b.x2 - a.x2));
  }
};

inline bool on_unit_square_boundary(const Point& p) {
  constexpr double tol = 1e-14;
  return std::abs(p.x1) < tol || std::abs(p.x1 - 1.0) < tol || std::abs(p.x2) < tol ||
         std::abs(p.x2 - 1.0) < tol;
}

/// Uniform mesh with n cells per side; every cell is cut along its
/// south-west/north-east diagonal. Nodes are numbered lexicographically by
/// (x2, x1), i.e. node (i, j) has index j * (n + 1) + i.
inline TriMesh uniform_unit_square(int n) {
  if (n < 1) {
    throw std::invalid_argument("uniform_unit_square: invalid subdivision count " +
                                std::to_string(n));
  }
  TriMesh mesh;
  mesh.subdivisions = n;
  const int side = n + 1;
  mesh.nodes.reserve(static_cast<std::size_t>(side) * side);
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      mesh.nodes.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
    }
  }
  mesh.elements.reserve(2 * static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int sw = j * side + i;
      const int se = sw + 1;
      const int nw = sw + side;
      const int ne = nw + 1;
      mesh.elements.push_back({sw, se, ne});
      mesh.elements.push_back({sw, ne, nw});
    }
  }
  for (int k = 0; k < static_cast<int>(mesh.nodes.size()); ++k) {
    if (on_unit_square_boundary(mesh.nodes[k])) {
      mesh.boundary_nodes.push_back(k);
    } else {
      mesh.interior_nodes.push_back(k);
    }
  }
  mesh.h = std::sqrt(2.0) / n;
  return mesh;
}

/// Correspondence between mesh nodes and unknowns of the finite element space.
struct DofMap {
  BoundaryCondition bc = BoundaryCondition::Dirichlet;
  std::vector<int> dof_to_node;
  std::vector<int> node_to_dof;  // -1 for nodes without an unknown

  std::size_t size() const { return dof_to_node.size(); }
};

/// Dirichlet: interior nodes only. Neumann: interior nodes first, then boundary
/// nodes, so that matrices split into interior/boundary blocks.
inline DofMap node_classification(const TriMesh& mesh, BoundaryCondition bc) {
  DofMap map;
  map.bc = bc;
  map.node_to_dof.assign(mesh.num_nodes(), -1);
  map.dof_to_node = mesh.interior_nodes;
  if (bc == BoundaryCondition::Neumann) {
    map.dof_to_node.insert(map.dof_to_node.end(), mesh.boundary_nodes.begin(),
                           mesh.boundary_nodes.end());
  }
  for (int d = 0; d < static_cast<int>(map.dof_to_node.size()); ++d) {
    map.node_to_dof[map.dof_to_node[d]] = d;
  }
  return map;
}

}  // namespace parasplit
