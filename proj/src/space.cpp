#include "mconv/space.hpp"

#include <unordered_set>

namespace mconv {

namespace {

// Local lattice indices of the nodes on one cell face, ordered along the
// face axis (y for left/right, x for bottom/top). n1 = nodes per axis.
std::vector<int> face_locals(int n1, int face) {
  std::vector<int> out(n1);
  for (int k = 0; k < n1; ++k) {
    switch (face) {
      case 0: out[k] = k * n1; break;             // left:   jx = 0
      case 1: out[k] = k * n1 + (n1 - 1); break;  // right:  jx = max
      case 2: out[k] = k; break;                  // bottom: jy = 0
      case 3: out[k] = (n1 - 1) * n1 + k; break;  // top:    jy = max
      default: MC_ASSERT(false, "bad face");
    }
  }
  return out;
}

std::uint64_t pack_key(std::int64_t kx, std::int64_t ky) {
  MC_ASSERT(kx >= 0 && ky >= 0 && kx < (std::int64_t(1) << 32) &&
                ky < (std::int64_t(1) << 32),
            "dof key out of packing range");
  return (std::uint64_t(kx) << 32) | std::uint64_t(ky);
}

}  // namespace

FunctionSpace::FunctionSpace(const Mesh& mesh, ElementType type)
    : mesh_(&mesh), type_(type) {
  number_dofs();
  if (fe::is_continuous(type_)) build_hanging_constraints();
  hanging_.close(n_dofs_);
}

void FunctionSpace::number_dofs() {
  const int nc = mesh_->n_active();
  cell_dofs_.assign(nc, {});

  if (type_ == ElementType::p1disc) {
    n_dofs_ = 3 * nc;
    points_.resize(n_dofs_);
    for (int a = 0; a < nc; ++a) {
      cell_dofs_[a] = {3 * a, 3 * a + 1, 3 * a + 2};
      const Pt c = mesh_->cell_geom(a).center();
      points_[3 * a] = points_[3 * a + 1] = points_[3 * a + 2] = c;
    }
    return;
  }

  // Nodal spaces: identify dofs by integer lattice coordinates. The vertex
  // grid has 2^24 units per root cell; doubling makes edge/cell midpoints
  // integers as well, so q2 nodes key exactly.
  const int deg = fe::degree(type_);
  const int n1 = deg + 1;
  const std::int64_t per2 = 2 * Mesh::int_coords_per_root();
  std::unordered_map<std::uint64_t, int> dof_of_key;
  dof_of_key.reserve(static_cast<std::size_t>(nc) * n1 * n1);
  keys_.clear();
  points_.clear();

  const Mesh::Extent ext = mesh_->extent();
  const double ux = (ext.x1 - ext.x0) / (mesh_->subdivisions_x() * double(per2));
  const double uy = (ext.y1 - ext.y0) / (mesh_->subdivisions_y() * double(per2));

  for (int a = 0; a < nc; ++a) {
    const auto sw = mesh_->cell_int_coords(a);
    const std::int64_t span2 =
        (std::int64_t(1) << (Mesh::kMaxLevel - mesh_->cell_level(a))) * 2;
    const std::int64_t step = span2 / deg;
    cell_dofs_[a].resize(n1 * n1);
    for (int jy = 0; jy < n1; ++jy)
      for (int jx = 0; jx < n1; ++jx) {
        const std::int64_t kx = 2 * sw[0] + jx * step;
        const std::int64_t ky = 2 * sw[1] + jy * step;
        const std::uint64_t key = pack_key(kx, ky);
        auto [it, inserted] = dof_of_key.try_emplace(key, n_dofs_);
        if (inserted) {
          ++n_dofs_;
          keys_.push_back({kx, ky});
          points_.push_back({ext.x0 + kx * ux, ext.y0 + ky * uy});
        }
        cell_dofs_[a][jy * n1 + jx] = it->second;
      }
  }
}

void FunctionSpace::build_hanging_constraints() {
  const int deg = fe::degree(type_);
  const int n1 = deg + 1;
  std::unordered_set<int> done;

  for (int a = 0; a < mesh_->n_active(); ++a) {
    for (int face = 0; face < 4; ++face) {
      const Mesh::FaceNeighbors fn = mesh_->neighbors(a, face);
      if (fn.count != 1 || !fn.coarser) continue;
      const int b = fn.cells[0];

      // Which half of the coarse edge does our edge cover?
      const auto my_sw = mesh_->cell_int_coords(a);
      const auto nb_sw = mesh_->cell_int_coords(b);
      const std::int64_t my_span =
          std::int64_t(1) << (Mesh::kMaxLevel - mesh_->cell_level(a));
      const int axis = (face < 2) ? 1 : 0;  // vertical faces vary in y
      const std::int64_t rel = my_sw[axis] - nb_sw[axis];
      MC_ASSERT(rel == 0 || rel == my_span, "unexpected hanging-face offset");
      const double half = (rel == 0) ? 0.0 : 0.5;

      const std::vector<int> mine = face_locals(n1, face);
      const std::vector<int> coarse = face_locals(n1, face ^ 1);
      for (int k = 0; k < n1; ++k) {
        const double s = half + 0.5 * k / deg;  // position on the coarse edge
        const double sd = s * deg;
        if (sd == static_cast<std::int64_t>(sd)) continue;  // shared dof
        const int dof = cell_dofs_[a][mine[k]];
        if (!done.insert(dof).second) continue;
        hanging_.add_line(dof);
        for (int i = 0; i < n1; ++i)
          hanging_.add_entry(dof, cell_dofs_[b][coarse[i]],
                             fe::lagrange_1d(n1, i, s));
      }
    }
  }
}

std::vector<int> FunctionSpace::boundary_dofs(Side side) const {
  std::vector<int> out;
  if (type_ == ElementType::p1disc) return out;
  const std::int64_t kx_max = 2 * Mesh::int_coords_per_root() * mesh_->subdivisions_x();
  const std::int64_t ky_max = 2 * Mesh::int_coords_per_root() * mesh_->subdivisions_y();
  for (int d = 0; d < n_dofs_; ++d) {
    const auto& k = keys_[d];
    const bool on = (side == Side::left && k[0] == 0) ||
                    (side == Side::right && k[0] == kx_max) ||
                    (side == Side::bottom && k[1] == 0) ||
                    (side == Side::top && k[1] == ky_max);
    if (on) out.push_back(d);
  }
  return out;
}

std::vector<int> FunctionSpace::boundary_dofs() const {
  std::vector<int> out;
  if (type_ == ElementType::p1disc) return out;
  const std::int64_t kx_max = 2 * Mesh::int_coords_per_root() * mesh_->subdivisions_x();
  const std::int64_t ky_max = 2 * Mesh::int_coords_per_root() * mesh_->subdivisions_y();
  for (int d = 0; d < n_dofs_; ++d) {
    const auto& k = keys_[d];
    if (k[0] == 0 || k[0] == kx_max || k[1] == 0 || k[1] == ky_max)
      out.push_back(d);
  }
  return out;
}

}  // namespace mconv
