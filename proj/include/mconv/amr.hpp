#pragma once

// Refinement indicators, marking, and solution transfer for the adaptive
// loop. Kelly indicators measure the normal-gradient jump of a continuous
// field across cell faces; gradient indicators flag steep cell-to-cell
// variation of any per-cell quantity (viscosity, density, ...). Indicators
// are rescaled and combined into a single field, turned into refine/coarsen
// flags by fraction-based marking with level and region overrides, and the
// solution is carried across the mesh change by embedding on refinement and
// nodal injection on coarsening.

#include <functional>
#include <string>
#include <vector>

#include "mconv/fieldops.hpp"
#include "mconv/mesh.hpp"
#include "mconv/space.hpp"

namespace mconv {

// One nonnegative value per active cell plus a label recording where the
// values came from ("kelly:T", "gradient:eta", ...).
struct IndicatorField {
  std::string provenance;
  std::vector<double> values;
};

// eta_K = (h_K * integral over the cell boundary of |[n . grad v]|^2)^(1/2)
// with h_K the cell diameter. Jumps across hanging faces are taken against
// the neighbor's polynomial, so `v` must be a conforming (distributed)
// vector. Boundary faces contribute nothing.
IndicatorField kelly_indicator(const FunctionSpace& s, const Vec& v,
                               std::string provenance = "kelly");

// eta_K = h_K^(1+d/2) |grad_h v(x_K)| with d = 2 and h_K = sqrt(cell area)
// (the side length on square cells). The discrete gradient comes from a
// least-squares fit over the centers of all edge neighbors, which stays
// well-posed on 2:1-balanced meshes; cells whose neighbors do not span both
// directions (a lone cell) report zero.
IndicatorField gradient_indicator(const std::function<double(int)>& cell_value,
                                  const Mesh& mesh,
                                  std::string provenance = "gradient");

enum class IndicatorScaling { none, max_normalize, range_normalize };
enum class CombineMode { max, sum };

// Per-entry rescaling before the fields are merged: `none` keeps the raw
// values, the normalizing choices map the entry onto [0, 1] affinely (an
// all-equal entry maps to zero under range normalization).
struct CombineEntry {
  IndicatorScaling scaling = IndicatorScaling::max_normalize;
  double weight = 1.0;
};

// Rescale each indicator per its entry, then take the per-cell max or sum.
// Throws if the lengths differ.
IndicatorField combine(const std::vector<IndicatorField>& indicators,
                       const std::vector<CombineEntry>& entries,
                       CombineMode mode);

// Enforce level >= `level` on every cell the predicate covers; the
// predicate sees the cell's bounding box, so "intersects a depth band" is a
// one-line test.
struct RegionRule {
  std::function<bool(const Mesh::CellGeom&)> covers;
  int level = 0;
};

struct MarkOptions {
  double refine_fraction = 0.0;   // top fraction of cells, by indicator
  double coarsen_fraction = 0.0;  // bottom fraction
  int min_level = 0;
  int max_level = Mesh::kMaxLevel;
  std::vector<RegionRule> regions;
};

// Count-based marking: round(refine_fraction * n) cells with the largest
// indicators get +1, round(coarsen_fraction * n) with the smallest get -1,
// ties broken toward the lower cell index. Region rules then force
// refinement below their level and veto coarsening at it; the global
// min/max levels trim last. The flags feed Mesh::execute_refinement.
std::vector<signed char> mark_cells(const IndicatorField& indicator,
                                    const Mesh& mesh, const MarkOptions& opts);

// Carries nodal fields across one execute_refinement call. Snapshot the
// fields while the old mesh is still alive, adapt, then interpolate onto
// the new space: children evaluate the parent polynomial (exact for nested
// spaces), a merged parent takes its nodal values from whichever child
// holds each node, and hanging constraints are re-applied at the end.
// Interleaved vector fields are handled per component.
class SolutionTransfer {
 public:
  explicit SolutionTransfer(const FunctionSpace& s);

  void add_field(const Vec& v, int components = 1);

  // Valid after the mesh this transfer was built on has been adapted;
  // `new_space` must live on that mesh and use the same element. Returns
  // one vector per added field, in order.
  std::vector<Vec> interpolate(const FunctionSpace& new_space,
                               const Mesh::AdaptResult& rec) const;

 private:
  struct Snapshot {
    int components = 1;
    std::vector<Vec> cell_coeffs;  // per old active cell, components packed
  };

  ElementType element_;
  int n_cells_ = 0;
  const Mesh* mesh_ = nullptr;           // stable across the adapt
  const FunctionSpace* space_ = nullptr;  // valid only until the adapt
  std::vector<Snapshot> fields_;
};

}  // namespace mconv
