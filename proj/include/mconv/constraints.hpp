#pragma once

// Affine constraints x_i = sum_j w_ij x_{m_j} + b_i, covering both hanging
// nodes (b = 0, interpolation weights) and Dirichlet values (no masters,
// b = boundary value). Constrained dofs are eliminated during assembly and
// filled back in afterwards with distribute().

#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mconv/types.hpp"

namespace mconv {

class ConstraintSet {
 public:
  struct Line {
    int dof = -1;
    std::vector<std::pair<int, double>> entries;  // (master dof, weight)
    double inhomogeneity = 0.0;
  };

  void add_line(int dof);
  void add_entry(int dof, int master, double weight);
  void set_inhomogeneity(int dof, double value);

  // Resolves chains (masters that are themselves constrained get substituted
  // until none remain), merges duplicate masters, and freezes the set.
  // n_dofs fixes the size of the lookup table.
  void close(int n_dofs);

  bool closed() const { return closed_; }
  int n_dofs() const { return n_dofs_; }
  int n_constraints() const { return static_cast<int>(lines_.size()); }
  bool is_constrained(int dof) const;
  const Line* line(int dof) const;  // nullptr if unconstrained
  const std::vector<Line>& lines() const { return lines_; }

  // Copy this set into `out` with all dof indices mapped through `map`
  // (e.g. interleaving components or shifting into a block system).
  void append_mapped(ConstraintSet& out, const std::function<int(int)>& map) const;

  // x_c = b_c + sum w x_m for every constrained dof.
  void distribute(Vec& x) const;
  // Zero out constrained entries (useful for residual checks).
  void set_zero(Vec& x) const;

  // Scatter a local matrix/vector into triplets+rhs with constrained rows and
  // columns eliminated: entries move to masters, inhomogeneities shift the
  // rhs. Constrained global rows receive nothing here; call
  // append_placeholder_rows() once per assembly so the matrix stays regular.
  void scatter(const MatX& local, const Vec& local_rhs, const std::vector<int>& dofs,
               std::vector<Eigen::Triplet<double>>& triplets, Vec& rhs) const;
  // Same, matrix only (rhs assembled elsewhere).
  void scatter_matrix(const MatX& local, const std::vector<int>& dofs,
                      std::vector<Eigen::Triplet<double>>& triplets) const;
  // Same, vector only.
  void scatter_vector(const Vec& local_rhs, const std::vector<int>& dofs, Vec& rhs) const;

  // One unit diagonal entry per constrained dof, decoupling those rows.
  void append_placeholder_rows(std::vector<Eigen::Triplet<double>>& triplets,
                               double diag = 1.0) const;

 private:
  std::vector<Line> lines_;
  std::unordered_map<int, int> building_index_;  // dof -> lines_ slot, pre-close
  std::vector<int> line_of_dof_;  // -1 or index into lines_, sized n_dofs_
  int n_dofs_ = 0;
  bool closed_ = false;

  int find_line(int dof);  // index in lines_, creating if absent (pre-close)
};

}  // namespace mconv
