#pragma once

#include "mconv/types.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace mconv {

// Which side of the domain a boundary face belongs to.
enum class Side : int { left = 0, right = 1, bottom = 2, top = 3, none = -1 };

// Adaptive quadrilateral mesh: a forest of quadtrees whose roots form a
// uniform nx-by-ny subdivision of a rectangle. Leaves ("active cells") are
// axis-aligned rectangles; refinement splits a cell into 4 congruent
// children, and a 2:1 level difference across edges is enforced at all
// times. Active cells are ordered by a deterministic depth-first traversal
// (roots row-major, children SW,SE,NW,NE), so cell indices are reproducible.
class Mesh {
public:
  // Maximum refinement depth below a root; integer cell coordinates are
  // expressed on the 2^kMaxLevel grid so that coincident vertices of cells
  // at different levels compare equal exactly. Keeping this at 20 leaves
  // room for root grids up to 2048 cells per axis before the packed 64-bit
  // dof keys run out of bits.
  static constexpr int kMaxLevel = 20;

  struct Extent {
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  };

  struct CellGeom {
    double x0, y0, hx, hy;
    Pt center() const { return {x0 + 0.5 * hx, y0 + 0.5 * hy}; }
    Pt vertex(int corner) const {  // 0=SW 1=SE 2=NW 3=NE
      return {x0 + ((corner & 1) ? hx : 0.0), y0 + ((corner & 2) ? hy : 0.0)};
    }
    Pt map(double xi, double eta) const {  // reference [0,1]^2 -> physical
      return {x0 + xi * hx, y0 + eta * hy};
    }
  };

  struct SizeMeasures {
    double diameter;             // longest diagonal
    double shortest_edge;        // min(hx, hy)
    double min_vertex_distance;  // smallest pairwise vertex distance
    double sqrt_area;
  };

  // One face of an active cell: the active cells on the other side.
  // count == 0: domain boundary. count == 1: same-level or coarser neighbor
  // (coarser == true in the latter case). count == 2: two half-face
  // neighbors one level finer, ordered along the face axis.
  struct FaceNeighbors {
    int count = 0;
    bool coarser = false;
    std::array<int, 2> cells = {-1, -1};  // active indices
  };

  // Records produced by execute_refinement, consumed by solution transfer.
  struct AdaptResult {
    int n_refined = 0;    // cells split (flagged + balance-induced)
    int n_coarsened = 0;  // sibling groups merged
    int n_balance = 0;    // splits forced by the 2:1 rule
    struct Kept {
      int old_active, new_active;
    };
    struct Refined {
      int old_active;                    // the parent before the split
      std::array<int, 4> new_children;   // active indices, SW,SE,NW,NE
    };
    struct Coarsened {
      int new_active;                    // the parent after the merge
      std::array<int, 4> old_children;   // active indices, SW,SE,NW,NE
    };
    std::vector<Kept> kept;
    std::vector<Refined> refined;
    std::vector<Coarsened> coarsened;
  };

  static Mesh create_rectangle(const Extent& extent, int nx, int ny);

  int n_active() const { return static_cast<int>(active_.size()); }
  double domain_area() const;
  const Extent& extent() const { return extent_; }

  CellGeom cell_geom(int active) const;
  SizeMeasures cell_size_measures(int active) const;
  int cell_level(int active) const;

  // Integer coordinates of the cell's SW corner on the 2^kMaxLevel grid of
  // its root, combined across roots: exact vertex/node identification.
  std::array<std::int64_t, 2> cell_int_coords(int active) const;
  static constexpr std::int64_t int_coords_per_root() { return std::int64_t(1) << kMaxLevel; }

  int subdivisions_x() const { return nx_; }
  int subdivisions_y() const { return ny_; }

  FaceNeighbors neighbors(int active, int face) const;  // face: 0=L 1=R 2=B 3=T
  Side boundary_side(int active, int face) const;       // Side::none if interior

  // Apply refine (+1) / coarsen (-1) / keep (0) flags; enforces 2:1 balance
  // (extra refinement) and unanimous-sibling coarsening with balance-safe
  // vetoes. Returns the old-to-new transfer records.
  AdaptResult execute_refinement(const std::vector<signed char>& flags);

  void refine_globally(int times = 1);

  bool is_two_to_one_balanced() const;  // full scan, test/debug use

  // Active cell containing the point (points on an interior cell edge go to
  // the upper/right cell, deterministically); returns the active index and
  // the reference coordinates within that cell.
  int locate(Pt p, double* xi = nullptr, double* eta = nullptr) const;

private:
  struct Node {
    int parent = -1;
    std::array<int, 4> child = {-1, -1, -1, -1};
    int rx = 0, ry = 0;           // root block
    std::uint8_t level = 0;
    std::uint32_t ix = 0, iy = 0; // coords within root at this level
    bool active = false;
  };

  Extent extent_;
  int nx_ = 0, ny_ = 0;
  double root_hx_ = 0, root_hy_ = 0;
  std::vector<Node> nodes_;
  std::vector<int> active_;        // node ids of leaves in traversal order
  std::vector<int> active_index_;  // node id -> active index or -1

  int root_id(int rx, int ry) const { return ry * nx_ + rx; }
  void rebuild_active();
  void collect_active(int node, std::vector<int>& out) const;
  int ensure_children(int node);
  // active node ids adjacent to `face` of the given cell (any depth)
  void adjacent_active(int node, int face, std::vector<int>& out) const;
  int face_neighbor_node(int node, int face) const;  // node at same-or-coarser depth, or -1
  void collect_side_leaves(int node, int side, std::vector<int>& out) const;
};

}  // namespace mconv
