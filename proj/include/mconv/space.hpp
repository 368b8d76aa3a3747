#pragma once

// Scalar function spaces on the adaptive mesh: global dof numbering with
// shared dofs identified across conforming faces, hanging-node constraints
// on nonconforming ones, and point/boundary lookup helpers. Vector-valued
// fields interleave components on top of the scalar layout
// (global = scalar_dof * n_components + component).

#include <array>
#include <unordered_map>
#include <vector>

#include "mconv/constraints.hpp"
#include "mconv/element.hpp"
#include "mconv/mesh.hpp"
#include "mconv/types.hpp"

namespace mconv {

class FunctionSpace {
 public:
  FunctionSpace(const Mesh& mesh, ElementType type);

  const Mesh& mesh() const { return *mesh_; }
  ElementType element() const { return type_; }
  int n_dofs() const { return n_dofs_; }

  // Dof ids of one cell in element-local ordering (lexicographic lattice).
  const std::vector<int>& cell_dofs(int active) const { return cell_dofs_[active]; }

  // Physical position of a dof (nodal spaces; the cell center for p1disc).
  Pt dof_point(int dof) const { return points_[dof]; }

  // Hanging-node constraints, closed. Dirichlet handling copies these and
  // adds boundary lines, so they are exposed rather than applied here.
  const ConstraintSet& hanging_constraints() const { return hanging_; }

  // Dofs whose support point lies on a given boundary side. For p1disc this
  // is empty (no nodal boundary values on a modal space).
  std::vector<int> boundary_dofs(Side side) const;

  // All four sides at once.
  std::vector<int> boundary_dofs() const;

 private:
  const Mesh* mesh_;
  ElementType type_;
  int n_dofs_ = 0;
  std::vector<std::vector<int>> cell_dofs_;
  std::vector<Pt> points_;
  std::vector<std::array<std::int64_t, 2>> keys_;  // doubled-lattice coordinates
  ConstraintSet hanging_;

  void number_dofs();
  void build_hanging_constraints();
};

}  // namespace mconv
