#include "mconv/constraints.hpp"

#include <algorithm>
#include <map>

namespace mconv {

int ConstraintSet::find_line(int dof) {
  MC_ASSERT(!closed_, "cannot modify a closed ConstraintSet");
  auto [it, inserted] = building_index_.try_emplace(dof, static_cast<int>(lines_.size()));
  if (inserted) lines_.push_back(Line{dof, {}, 0.0});
  return it->second;
}

void ConstraintSet::add_line(int dof) { find_line(dof); }

void ConstraintSet::add_entry(int dof, int master, double weight) {
  lines_[find_line(dof)].entries.emplace_back(master, weight);
}

void ConstraintSet::set_inhomogeneity(int dof, double value) {
  lines_[find_line(dof)].inhomogeneity = value;
}

void ConstraintSet::close(int n_dofs) {
  MC_ASSERT(!closed_, "ConstraintSet already closed");
  building_index_.clear();
  n_dofs_ = n_dofs;
  line_of_dof_.assign(n_dofs, -1);
  std::sort(lines_.begin(), lines_.end(),
            [](const Line& a, const Line& b) { return a.dof < b.dof; });
  for (int i = 0; i < static_cast<int>(lines_.size()); ++i) {
    MC_ASSERT(i == 0 || lines_[i].dof != lines_[i - 1].dof,
              "duplicate constraint line");
    MC_ASSERT(lines_[i].dof >= 0 && lines_[i].dof < n_dofs,
              "constraint dof out of range");
    line_of_dof_[lines_[i].dof] = i;
  }

  // Substitute constrained masters until every master is free. Hanging-node
  // chains always point from finer to coarser levels, so this terminates;
  // the sweep cap catches accidental cycles.
  for (int sweep = 0;; ++sweep) {
    MC_ASSERT(sweep < 64, "constraint chain does not terminate");
    bool changed = false;
    for (Line& ln : lines_) {
      std::vector<std::pair<int, double>> expanded;
      for (const auto& [m, w] : ln.entries) {
        const int mi = (m >= 0 && m < n_dofs) ? line_of_dof_[m] : -1;
        if (mi < 0) {
          expanded.emplace_back(m, w);
          continue;
        }
        changed = true;
        for (const auto& [mm, ww] : lines_[mi].entries)
          expanded.emplace_back(mm, w * ww);
        ln.inhomogeneity += w * lines_[mi].inhomogeneity;
      }
      ln.entries = std::move(expanded);
    }
    if (!changed) break;
  }

  // Merge duplicate masters and drop numerically empty entries.
  for (Line& ln : lines_) {
    std::map<int, double> merged;
    for (const auto& [m, w] : ln.entries) merged[m] += w;
    ln.entries.clear();
    for (const auto& [m, w] : merged)
      if (w != 0.0) ln.entries.emplace_back(m, w);
  }
  closed_ = true;
}

bool ConstraintSet::is_constrained(int dof) const {
  MC_ASSERT(closed_, "ConstraintSet must be closed first");
  return dof >= 0 && dof < n_dofs_ && line_of_dof_[dof] >= 0;
}

const ConstraintSet::Line* ConstraintSet::line(int dof) const {
  if (!is_constrained(dof)) return nullptr;
  return &lines_[line_of_dof_[dof]];
}

void ConstraintSet::append_mapped(ConstraintSet& out,
                                  const std::function<int(int)>& map) const {
  MC_ASSERT(closed_, "ConstraintSet must be closed first");
  for (const Line& ln : lines_) {
    const int dof = map(ln.dof);
    out.add_line(dof);
    for (const auto& [m, w] : ln.entries) out.add_entry(dof, map(m), w);
    if (ln.inhomogeneity != 0.0) out.set_inhomogeneity(dof, ln.inhomogeneity);
  }
}

void ConstraintSet::distribute(Vec& x) const {
  MC_ASSERT(closed_, "ConstraintSet must be closed first");
  for (const Line& ln : lines_) {
    double v = ln.inhomogeneity;
    for (const auto& [m, w] : ln.entries) v += w * x[m];
    x[ln.dof] = v;
  }
}

void ConstraintSet::set_zero(Vec& x) const {
  MC_ASSERT(closed_, "ConstraintSet must be closed first");
  for (const Line& ln : lines_) x[ln.dof] = 0.0;
}

void ConstraintSet::scatter(const MatX& local, const Vec& local_rhs,
                            const std::vector<int>& dofs,
                            std::vector<Eigen::Triplet<double>>& triplets,
                            Vec& rhs) const {
  scatter_matrix(local, dofs, triplets);
  scatter_vector(local_rhs, dofs, rhs);
  // Inhomogeneous constraints shift the rhs of the free rows they couple to.
  const int n = static_cast<int>(dofs.size());
  for (int j = 0; j < n; ++j) {
    const Line* lj = line(dofs[j]);
    if (!lj || lj->inhomogeneity == 0.0) continue;
    for (int i = 0; i < n; ++i) {
      const double a = local(i, j) * lj->inhomogeneity;
      if (a == 0.0) continue;
      const Line* li = line(dofs[i]);
      if (!li) {
        rhs[dofs[i]] -= a;
      } else {
        for (const auto& [mi, wi] : li->entries) rhs[mi] -= wi * a;
      }
    }
  }
}

void ConstraintSet::scatter_matrix(const MatX& local, const std::vector<int>& dofs,
                                   std::vector<Eigen::Triplet<double>>& triplets) const {
  MC_ASSERT(closed_, "ConstraintSet must be closed first");
  const int n = static_cast<int>(dofs.size());
  // Representation of each local dof as a list of (free global dof, weight).
  thread_local std::vector<std::vector<std::pair<int, double>>> rep;
  rep.resize(n);
  for (int i = 0; i < n; ++i) {
    rep[i].clear();
    const Line* li = line(dofs[i]);
    if (!li)
      rep[i].emplace_back(dofs[i], 1.0);
    else
      for (const auto& [m, w] : li->entries) rep[i].emplace_back(m, w);
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double a = local(i, j);
      if (a == 0.0) continue;
      for (const auto& [gi, wi] : rep[i])
        for (const auto& [gj, wj] : rep[j])
          triplets.emplace_back(gi, gj, wi * wj * a);
    }
}

void ConstraintSet::scatter_vector(const Vec& local_rhs, const std::vector<int>& dofs,
                                   Vec& rhs) const {
  MC_ASSERT(closed_, "ConstraintSet must be closed first");
  const int n = static_cast<int>(dofs.size());
  for (int i = 0; i < n; ++i) {
    const double f = local_rhs[i];
    if (f == 0.0) continue;
    const Line* li = line(dofs[i]);
    if (!li)
      rhs[dofs[i]] += f;
    else
      for (const auto& [m, w] : li->entries) rhs[m] += w * f;
  }
}

void ConstraintSet::append_placeholder_rows(std::vector<Eigen::Triplet<double>>& triplets,
                                            double diag) const {
  MC_ASSERT(closed_, "ConstraintSet must be closed first");
  for (const Line& ln : lines_) triplets.emplace_back(ln.dof, ln.dof, diag);
}

}  // namespace mconv
