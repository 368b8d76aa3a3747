#include "mconv/mesh.hpp"

#include <algorithm>
#include <cmath>

namespace mconv {

namespace {
// For a face of a cell, the child indices of the *neighbor* that touch that
// face, ordered along the face axis (bottom->top for vertical faces,
// left->right for horizontal ones). Children are 0=SW 1=SE 2=NW 3=NE.
constexpr int kFacingChildren[4][2] = {{1, 3}, {0, 2}, {2, 3}, {0, 1}};
// Children of a cell lying on one of its own sides, same ordering.
constexpr int kOwnSideChildren[4][2] = {{0, 2}, {1, 3}, {0, 1}, {2, 3}};
}  // namespace

Mesh Mesh::create_rectangle(const Extent& extent, int nx, int ny) {
  require(nx >= 1 && ny >= 1, "create_rectangle: subdivisions must be >= 1");
  require(extent.x1 > extent.x0 && extent.y1 > extent.y0,
          "create_rectangle: extent must have positive size");
  Mesh m;
  m.extent_ = extent;
  m.nx_ = nx;
  m.ny_ = ny;
  m.root_hx_ = (extent.x1 - extent.x0) / nx;
  m.root_hy_ = (extent.y1 - extent.y0) / ny;
  m.nodes_.resize(static_cast<std::size_t>(nx) * ny);
  for (int ry = 0; ry < ny; ++ry)
    for (int rx = 0; rx < nx; ++rx) {
      Node& n = m.nodes_[m.root_id(rx, ry)];
      n.rx = rx;
      n.ry = ry;
      n.active = true;
    }
  m.rebuild_active();
  return m;
}

double Mesh::domain_area() const {
  return (extent_.x1 - extent_.x0) * (extent_.y1 - extent_.y0);
}

Mesh::CellGeom Mesh::cell_geom(int active) const {
  const Node& n = nodes_[active_[active]];
  const double hx = root_hx_ / double(1u << n.level);
  const double hy = root_hy_ / double(1u << n.level);
  return {extent_.x0 + n.rx * root_hx_ + n.ix * hx,
          extent_.y0 + n.ry * root_hy_ + n.iy * hy, hx, hy};
}

Mesh::SizeMeasures Mesh::cell_size_measures(int active) const {
  const CellGeom g = cell_geom(active);
  // For a rectangle the closest vertex pair is the shorter edge; diagonals
  // are always longer.
  return {std::hypot(g.hx, g.hy), std::min(g.hx, g.hy), std::min(g.hx, g.hy),
          std::sqrt(g.hx * g.hy)};
}

int Mesh::cell_level(int active) const { return nodes_[active_[active]].level; }

std::array<std::int64_t, 2> Mesh::cell_int_coords(int active) const {
  const Node& n = nodes_[active_[active]];
  const int shift = kMaxLevel - n.level;
  const std::int64_t per = int_coords_per_root();
  return {n.rx * per + (std::int64_t(n.ix) << shift),
          n.ry * per + (std::int64_t(n.iy) << shift)};
}

Side Mesh::boundary_side(int active, int face) const {
  const Node& n = nodes_[active_[active]];
  const std::uint32_t last = (1u << n.level) - 1;
  switch (face) {
    case 0: return (n.ix == 0 && n.rx == 0) ? Side::left : Side::none;
    case 1: return (n.ix == last && n.rx == nx_ - 1) ? Side::right : Side::none;
    case 2: return (n.iy == 0 && n.ry == 0) ? Side::bottom : Side::none;
    case 3: return (n.iy == last && n.ry == ny_ - 1) ? Side::top : Side::none;
  }
  MC_ASSERT(false, "bad face index");
}

int Mesh::face_neighbor_node(int node, int face) const {
  const Node& n = nodes_[node];
  const std::uint32_t cells = 1u << n.level;
  std::int64_t ix = n.ix, iy = n.iy;
  int rx = n.rx, ry = n.ry;
  switch (face) {
    case 0: ix -= 1; if (ix < 0) { ix = cells - 1; rx -= 1; } break;
    case 1: ix += 1; if (ix == cells) { ix = 0; rx += 1; } break;
    case 2: iy -= 1; if (iy < 0) { iy = cells - 1; ry -= 1; } break;
    case 3: iy += 1; if (iy == cells) { iy = 0; ry += 1; } break;
    default: MC_ASSERT(false, "bad face index");
  }
  if (rx < 0 || rx >= nx_ || ry < 0 || ry >= ny_) return -1;

  int cur = root_id(rx, ry);
  for (int depth = 0; depth < n.level; ++depth) {
    const Node& c = nodes_[cur];
    if (c.active || c.child[0] == -1) break;
    const int bit = n.level - 1 - depth;
    const int dx = static_cast<int>((ix >> bit) & 1);
    const int dy = static_cast<int>((iy >> bit) & 1);
    cur = c.child[dy * 2 + dx];
  }
  return cur;
}

void Mesh::collect_side_leaves(int node, int side, std::vector<int>& out) const {
  const Node& n = nodes_[node];
  if (n.active) {
    out.push_back(node);
    return;
  }
  MC_ASSERT(n.child[0] != -1, "internal node without children");
  for (int k = 0; k < 2; ++k)
    collect_side_leaves(n.child[kOwnSideChildren[side][k]], side, out);
}

void Mesh::adjacent_active(int node, int face, std::vector<int>& out) const {
  out.clear();
  const int nb = face_neighbor_node(node, face);
  if (nb < 0) return;
  const Node& n = nodes_[nb];
  if (n.active) {
    out.push_back(nb);
    return;
  }
  // Neighbor subtree is finer than us: gather its leaves facing our cell.
  // kFacingChildren picks the neighbor's side that touches `face`.
  const int facing_side = (face == 0) ? 1 : (face == 1) ? 0 : (face == 2) ? 3 : 2;
  for (int k = 0; k < 2; ++k)
    collect_side_leaves(n.child[kFacingChildren[face][k]], facing_side, out);
}

Mesh::FaceNeighbors Mesh::neighbors(int active, int face) const {
  std::vector<int> adj;
  adjacent_active(active_[active], face, adj);
  FaceNeighbors fn;
  fn.count = static_cast<int>(adj.size());
  MC_ASSERT(fn.count <= 2, "more than two face neighbors: mesh not 2:1 balanced");
  const int my_level = nodes_[active_[active]].level;
  for (int k = 0; k < fn.count; ++k) fn.cells[k] = active_index_[adj[k]];
  if (fn.count == 1) fn.coarser = nodes_[adj[0]].level < my_level;
  return fn;
}

int Mesh::ensure_children(int node) {
  if (nodes_[node].child[0] != -1) return 0;
  const int base = static_cast<int>(nodes_.size());
  nodes_.resize(nodes_.size() + 4);
  Node& n = nodes_[node];  // re-reference after resize
  for (int k = 0; k < 4; ++k) {
    Node& c = nodes_[base + k];
    c.parent = node;
    c.rx = n.rx;
    c.ry = n.ry;
    c.level = static_cast<std::uint8_t>(n.level + 1);
    c.ix = 2 * n.ix + (k & 1);
    c.iy = 2 * n.iy + ((k >> 1) & 1);
    n.child[k] = base + k;
  }
  return base;
}

void Mesh::collect_active(int node, std::vector<int>& out) const {
  const Node& n = nodes_[node];
  if (n.active) {
    out.push_back(node);
    return;
  }
  if (n.child[0] == -1) return;
  for (int k = 0; k < 4; ++k) collect_active(n.child[k], out);
}

void Mesh::rebuild_active() {
  active_.clear();
  for (int ry = 0; ry < ny_; ++ry)
    for (int rx = 0; rx < nx_; ++rx) collect_active(root_id(rx, ry), active_);
  active_index_.assign(nodes_.size(), -1);
  for (int a = 0; a < static_cast<int>(active_.size()); ++a)
    active_index_[active_[a]] = a;
}

Mesh::AdaptResult Mesh::execute_refinement(const std::vector<signed char>& flags) {
  require(flags.size() == active_.size(),
          "execute_refinement: one flag per active cell required");

  // Node-indexed views of the request.
  std::vector<char> refine(nodes_.size(), 0), coarsen(nodes_.size(), 0);
  for (int a = 0; a < n_active(); ++a) {
    const int node = active_[a];
    if (flags[a] > 0 && nodes_[node].level < kMaxLevel) refine[node] = 1;
    if (flags[a] < 0 && nodes_[node].parent != -1) coarsen[node] = 1;
  }

  AdaptResult result;

  // 2:1 closure: refining a cell raises its effective level by one; any
  // active neighbor that would fall two levels behind must refine too.
  // Meshes entering here are balanced, so one extra level per cell suffices;
  // iterate to propagate chains.
  std::vector<int> adj;
  for (bool changed = true; changed;) {
    changed = false;
    for (int a = 0; a < n_active(); ++a) {
      const int node = active_[a];
      if (refine[node]) continue;
      const int my_eff = nodes_[node].level;
      for (int face = 0; face < 4 && !refine[node]; ++face) {
        adjacent_active(node, face, adj);
        for (int nb : adj) {
          const int nb_eff = nodes_[nb].level + (refine[nb] ? 1 : 0);
          if (nb_eff - my_eff >= 2) {
            refine[node] = 1;
            coarsen[node] = 0;
            ++result.n_balance;
            changed = true;
            break;
          }
        }
      }
    }
  }
  for (int a = 0; a < n_active(); ++a)
    if (refine[active_[a]]) coarsen[active_[a]] = 0;

  // Coarsening: all four siblings must agree, and the merged parent must not
  // end up two levels coarser than any (post-refinement) neighbor.
  std::vector<int> merge_parents;
  std::vector<char> considered(nodes_.size(), 0);
  for (int a = 0; a < n_active(); ++a) {
    const int node = active_[a];
    if (!coarsen[node]) continue;
    const int parent = nodes_[node].parent;
    if (considered[parent]) continue;
    considered[parent] = 1;
    bool ok = true;
    for (int k = 0; k < 4 && ok; ++k) {
      const int c = nodes_[parent].child[k];
      ok = nodes_[c].active && coarsen[c];
    }
    for (int face = 0; face < 4 && ok; ++face) {
      adjacent_active(parent, face, adj);
      for (int nb : adj) {
        const int nb_eff = nodes_[nb].level + (refine[nb] ? 1 : 0);
        if (nb_eff > nodes_[parent].level + 1) {
          ok = false;
          break;
        }
      }
    }
    if (ok) merge_parents.push_back(parent);
  }

  // Snapshot old active indices, then apply.
  std::vector<int> old_active_of(nodes_.size(), -1);
  for (int a = 0; a < n_active(); ++a) old_active_of[active_[a]] = a;

  std::vector<int> split_nodes;
  for (int a = 0; a < n_active(); ++a) {
    const int node = active_[a];
    if (!refine[node]) continue;
    split_nodes.push_back(node);
    ensure_children(node);
    nodes_[node].active = false;
    for (int k = 0; k < 4; ++k) nodes_[nodes_[node].child[k]].active = true;
    ++result.n_refined;
  }
  for (int parent : merge_parents) {
    for (int k = 0; k < 4; ++k) nodes_[nodes_[parent].child[k]].active = false;
    nodes_[parent].active = true;
    ++result.n_coarsened;
  }

  rebuild_active();

  for (int node : split_nodes) {
    AdaptResult::Refined r;
    r.old_active = old_active_of[node];
    for (int k = 0; k < 4; ++k)
      r.new_children[k] = active_index_[nodes_[node].child[k]];
    result.refined.push_back(r);
  }
  for (int parent : merge_parents) {
    AdaptResult::Coarsened c;
    c.new_active = active_index_[parent];
    for (int k = 0; k < 4; ++k)
      c.old_children[k] = old_active_of[nodes_[parent].child[k]];
    result.coarsened.push_back(c);
  }
  const int n_old_nodes = static_cast<int>(old_active_of.size());
  for (int a = 0; a < n_active(); ++a) {
    const int node = active_[a];  // nodes created above have node >= n_old_nodes
    if (node < n_old_nodes && old_active_of[node] >= 0 && !refine[node])
      result.kept.push_back({old_active_of[node], a});
  }
  return result;
}

void Mesh::refine_globally(int times) {
  for (int i = 0; i < times; ++i) {
    std::vector<signed char> flags(active_.size(), 1);
    execute_refinement(flags);
  }
}

bool Mesh::is_two_to_one_balanced() const {
  std::vector<int> adj;
  for (int a = 0; a < n_active(); ++a) {
    const int my_level = nodes_[active_[a]].level;
    for (int face = 0; face < 4; ++face) {
      adjacent_active(active_[a], face, adj);
      for (int nb : adj)
        if (std::abs(nodes_[nb].level - my_level) > 1) return false;
    }
  }
  return true;
}

int Mesh::locate(Pt p, double* xi, double* eta) const {
  const double fx = (p.x - extent_.x0) / root_hx_;
  const double fy = (p.y - extent_.y0) / root_hy_;
  const int rx = std::clamp(static_cast<int>(std::floor(fx)), 0, nx_ - 1);
  const int ry = std::clamp(static_cast<int>(std::floor(fy)), 0, ny_ - 1);
  int cur = root_id(rx, ry);
  while (!nodes_[cur].active) {
    MC_ASSERT(nodes_[cur].child[0] != -1, "inconsistent tree in locate");
    const Node& n = nodes_[cur];
    const double h = 1.0 / double(1u << n.level);
    const double mx = extent_.x0 + (n.rx + (n.ix + 0.5) * h) * root_hx_;
    const double my = extent_.y0 + (n.ry + (n.iy + 0.5) * h) * root_hy_;
    const int dx = p.x >= mx ? 1 : 0;
    const int dy = p.y >= my ? 1 : 0;
    cur = n.child[dy * 2 + dx];
  }
  const int a = active_index_[cur];
  if (xi || eta) {
    const CellGeom g = cell_geom(a);
    if (xi) *xi = std::clamp((p.x - g.x0) / g.hx, 0.0, 1.0);
    if (eta) *eta = std::clamp((p.y - g.y0) / g.hy, 0.0, 1.0);
  }
  return a;
}

}  // namespace mconv
