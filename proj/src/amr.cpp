#include "mconv/amr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mconv/element.hpp"
#include "mconv/transport.hpp"

namespace mconv {

namespace {

// Gradient of the local polynomial with coefficients `c` at reference
// coordinates (xi, eta) of the cell with geometry `g`.
Vec2 local_gradient(ElementType type, const Vec& c, const Mesh::CellGeom& g,
                    double xi, double eta) {
  const int nd = fe::n_dofs(type);
  double dN[9][2];
  fe::shape_grad(type, xi, eta, dN);
  double gx = 0, gy = 0;
  for (int j = 0; j < nd; ++j) {
    gx += c[j] * dN[j][0] / g.hx;
    gy += c[j] * dN[j][1] / g.hy;
  }
  return {gx, gy};
}

double local_value(ElementType type, const Vec& c, double xi, double eta) {
  const int nd = fe::n_dofs(type);
  double N[9];
  fe::shape(type, xi, eta, N);
  double v = 0;
  for (int j = 0; j < nd; ++j) v += c[j] * N[j];
  return v;
}

}  // namespace

IndicatorField kelly_indicator(const FunctionSpace& s, const Vec& v,
                               std::string provenance) {
  require(fe::is_continuous(s.element()),
          "kelly indicator needs a continuous field");
  require(v.size() == s.n_dofs(), "field does not match the space");
  const Mesh& mesh = s.mesh();
  const int nc = mesh.n_active();

  // The traced normal gradient of a q2 field is quadratic along a face, so
  // its squared jump integrates exactly with three Gauss points.
  std::vector<double> pts, wts;
  gauss_legendre(3, pts, wts);
  const double nx[4] = {-1, 1, 0, 0}, ny[4] = {0, 0, -1, 1};

  IndicatorField out;
  out.provenance = std::move(provenance);
  out.values.assign(nc, 0.0);

  for (int c = 0; c < nc; ++c) {
    const Mesh::CellGeom g = mesh.cell_geom(c);
    const Vec cc = cell_coeffs(s, v, c);
    double sum = 0.0;
    for (int face = 0; face < 4; ++face) {
      const Mesh::FaceNeighbors fn = mesh.neighbors(c, face);
      if (fn.count == 0) continue;  // domain boundary: no jump
      const double face_len = (face < 2) ? g.hy : g.hx;
      // One segment against a same-level or coarser neighbor, two against
      // a pair of finer half-face neighbors (ordered along the face).
      const int n_seg = fn.count;
      for (int seg = 0; seg < n_seg; ++seg) {
        const int nb = fn.cells[seg];
        const Mesh::CellGeom gn = mesh.cell_geom(nb);
        const Vec cn = cell_coeffs(s, v, nb);
        const double seg_len = face_len / n_seg;
        for (std::size_t q = 0; q < pts.size(); ++q) {
          const double t = (seg + pts[q]) / n_seg;
          const double xi = (face == 0) ? 0.0 : (face == 1) ? 1.0 : t;
          const double eta = (face == 2) ? 0.0 : (face == 3) ? 1.0 : t;
          const Pt x = g.map(xi, eta);
          const Vec2 gk = local_gradient(s.element(), cc, g, xi, eta);
          const Vec2 gb =
              local_gradient(s.element(), cn, gn, (x.x - gn.x0) / gn.hx,
                             (x.y - gn.y0) / gn.hy);
          const double jump =
              (gk[0] - gb[0]) * nx[face] + (gk[1] - gb[1]) * ny[face];
          sum += wts[q] * seg_len * jump * jump;
        }
      }
    }
    out.values[c] = std::sqrt(mesh.cell_size_measures(c).diameter * sum);
  }
  return out;
}

IndicatorField gradient_indicator(const std::function<double(int)>& cell_value,
                                  const Mesh& mesh, std::string provenance) {
  const int nc = mesh.n_active();
  IndicatorField out;
  out.provenance = std::move(provenance);
  out.values.assign(nc, 0.0);

  std::vector<double> vals(nc);
  for (int c = 0; c < nc; ++c) vals[c] = cell_value(c);

  for (int c = 0; c < nc; ++c) {
    const Pt xc = mesh.cell_geom(c).center();
    // Least-squares fit of v(x) - v(x_c) = g . (x - x_c) over the edge
    // neighbors, via the 2x2 normal equations.
    double g11 = 0, g12 = 0, g22 = 0, b1 = 0, b2 = 0;
    for (int face = 0; face < 4; ++face) {
      const Mesh::FaceNeighbors fn = mesh.neighbors(c, face);
      for (int k = 0; k < fn.count; ++k) {
        const Pt xn = mesh.cell_geom(fn.cells[k]).center();
        const double dx = xn.x - xc.x, dy = xn.y - xc.y;
        const double dv = vals[fn.cells[k]] - vals[c];
        g11 += dx * dx;
        g12 += dx * dy;
        g22 += dy * dy;
        b1 += dv * dx;
        b2 += dv * dy;
      }
    }
    // Pseudo-inverse through the eigenpairs so a degenerate neighborhood
    // (single row of cells) still yields the component it determines.
    const SymEigen2 e = sym_eigen(g11, g12, g22);
    double gx = 0, gy = 0;
    if (e.lambda1 > 0.0) {
      const double p1 = (e.v1[0] * b1 + e.v1[1] * b2) / e.lambda1;
      gx = p1 * e.v1[0];
      gy = p1 * e.v1[1];
      if (e.lambda2 > 1e-12 * e.lambda1) {
        const double p2 = (e.v2[0] * b1 + e.v2[1] * b2) / e.lambda2;
        gx += p2 * e.v2[0];
        gy += p2 * e.v2[1];
      }
    }
    const double h = mesh.cell_size_measures(c).sqrt_area;
    out.values[c] = h * h * std::hypot(gx, gy);  // h^(1+d/2), d = 2
  }
  return out;
}

IndicatorField combine(const std::vector<IndicatorField>& indicators,
                       const std::vector<CombineEntry>& entries,
                       CombineMode mode) {
  require(!indicators.empty(), "combine needs at least one indicator");
  require(indicators.size() == entries.size(),
          "one combine entry per indicator is required");
  const std::size_t nc = indicators[0].values.size();
  for (const IndicatorField& f : indicators)
    require(f.values.size() == nc, "indicator lengths differ");

  IndicatorField out;
  out.values.assign(nc, 0.0);
  std::string joined;
  for (std::size_t k = 0; k < indicators.size(); ++k) {
    const std::vector<double>& v = indicators[k].values;
    double lo = 0.0, hi = 0.0;
    if (nc > 0) {
      lo = *std::min_element(v.begin(), v.end());
      hi = *std::max_element(v.begin(), v.end());
    }
    double shift = 0.0, scale = 0.0;
    switch (entries[k].scaling) {
      case IndicatorScaling::none:
        scale = 1.0;
        break;
      case IndicatorScaling::max_normalize:
        scale = hi > 0.0 ? 1.0 / hi : 0.0;
        break;
      case IndicatorScaling::range_normalize:
        shift = lo;
        scale = hi > lo ? 1.0 / (hi - lo) : 0.0;
        break;
    }
    for (std::size_t c = 0; c < nc; ++c) {
      const double s = entries[k].weight * scale * (v[c] - shift);
      out.values[c] =
          (mode == CombineMode::max) ? std::max(out.values[c], s)
                                     : out.values[c] + s;
    }
    joined += (k ? ", " : "") + indicators[k].provenance;
  }
  out.provenance =
      (mode == CombineMode::max ? "max(" : "sum(") + joined + ")";
  return out;
}

std::vector<signed char> mark_cells(const IndicatorField& indicator,
                                    const Mesh& mesh,
                                    const MarkOptions& opts) {
  const int nc = mesh.n_active();
  require(static_cast<int>(indicator.values.size()) == nc,
          "indicator does not match the mesh");
  require(opts.refine_fraction >= 0.0 && opts.refine_fraction <= 1.0 &&
              opts.coarsen_fraction >= 0.0 && opts.coarsen_fraction <= 1.0,
          "marking fractions must lie in [0, 1]");
  require(opts.refine_fraction + opts.coarsen_fraction <= 1.0,
          "marking fractions cover more than the whole mesh");

  std::vector<int> order(nc);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (indicator.values[a] != indicator.values[b])
      return indicator.values[a] > indicator.values[b];
    return a < b;  // deterministic tie-break: lowest index refines first
  });

  int n_ref = static_cast<int>(std::lround(opts.refine_fraction * nc));
  n_ref = std::min(n_ref, nc);
  int n_co = static_cast<int>(std::lround(opts.coarsen_fraction * nc));
  n_co = std::min(n_co, nc - n_ref);  // rounding must not overlap the sets

  std::vector<signed char> flags(nc, 0);
  for (int k = 0; k < n_ref; ++k) flags[order[k]] = 1;
  for (int k = 0; k < n_co; ++k) flags[order[nc - 1 - k]] = -1;

  // Level floors force refinement below them and veto coarsening at them
  // (a floor of zero constrains nothing: root cells cannot coarsen anyway).
  for (const RegionRule& rule : opts.regions) {
    for (int c = 0; c < nc; ++c) {
      if (!rule.covers(mesh.cell_geom(c))) continue;
      if (mesh.cell_level(c) < rule.level)
        flags[c] = 1;
      else if (mesh.cell_level(c) == rule.level && rule.level > 0 &&
               flags[c] < 0)
        flags[c] = 0;
    }
  }
  for (int c = 0; c < nc; ++c) {
    const int level = mesh.cell_level(c);
    if (level < opts.min_level)
      flags[c] = 1;
    else if (level == opts.min_level && opts.min_level > 0 && flags[c] < 0)
      flags[c] = 0;
    if (level >= opts.max_level && flags[c] > 0) flags[c] = 0;
  }
  return flags;
}

SolutionTransfer::SolutionTransfer(const FunctionSpace& s)
    : element_(s.element()),
      n_cells_(s.mesh().n_active()),
      mesh_(&s.mesh()),
      space_(&s) {
  require(fe::is_continuous(element_),
          "solution transfer needs a nodal continuous element");
}

void SolutionTransfer::add_field(const Vec& v, int components) {
  require(components >= 1, "field needs at least one component");
  require(v.size() == static_cast<Eigen::Index>(components) * space_->n_dofs(),
          "field does not match the transfer space");
  const int nd = fe::n_dofs(element_);
  Snapshot snap;
  snap.components = components;
  snap.cell_coeffs.reserve(n_cells_);
  for (int c = 0; c < n_cells_; ++c) {
    Vec packed(components * nd);
    for (int comp = 0; comp < components; ++comp)
      packed.segment(comp * nd, nd) =
          cell_coeffs(*space_, v, c, components, comp);
    snap.cell_coeffs.push_back(std::move(packed));
  }
  fields_.push_back(std::move(snap));
}

std::vector<Vec> SolutionTransfer::interpolate(
    const FunctionSpace& new_space, const Mesh::AdaptResult& rec) const {
  require(&new_space.mesh() == mesh_,
          "transfer target lives on a different mesh");
  require(new_space.element() == element_,
          "transfer target uses a different element");
  require(static_cast<int>(rec.kept.size() + rec.refined.size() +
                           4 * rec.coarsened.size()) == n_cells_,
          "adapt records do not cover the snapshot mesh");

  const int nd = fe::n_dofs(element_);
  std::vector<Vec> out;
  out.reserve(fields_.size());
  for (const Snapshot& f : fields_)
    out.push_back(Vec::Zero(static_cast<Eigen::Index>(f.components) *
                            new_space.n_dofs()));

  // Write the local values of one new cell for every field, component-wise.
  const auto put = [&](int new_cell, int old_cell,
                       const std::function<Pt(Pt)>& to_old_ref) {
    const std::vector<int>& dofs = new_space.cell_dofs(new_cell);
    for (std::size_t fi = 0; fi < fields_.size(); ++fi) {
      const Snapshot& f = fields_[fi];
      const Vec& packed = f.cell_coeffs[old_cell];
      for (int j = 0; j < nd; ++j) {
        const Pt ref = to_old_ref(fe::node(element_, j));
        for (int comp = 0; comp < f.components; ++comp)
          out[fi][static_cast<Eigen::Index>(f.components) * dofs[j] + comp] =
              local_value(element_, packed.segment(comp * nd, nd), ref.x,
                          ref.y);
      }
    }
  };

  for (const auto& k : rec.kept)
    put(k.new_active, k.old_active, [](Pt p) { return p; });

  for (const auto& r : rec.refined) {
    for (int child = 0; child < 4; ++child) {
      const double ox = child & 1, oy = (child >> 1) & 1;
      put(r.new_children[child], r.old_active, [ox, oy](Pt p) {
        return Pt{0.5 * (p.x + ox), 0.5 * (p.y + oy)};
      });
    }
  }

  // Nodal injection: every parent node lies inside (or on the edge of) one
  // of the merged children; the children agree where they meet, so picking
  // the upper/right one is deterministic and consistent.
  for (const auto& co : rec.coarsened) {
    const std::vector<int>& dofs = new_space.cell_dofs(co.new_active);
    for (int j = 0; j < nd; ++j) {
      const Pt p = fe::node(element_, j);
      const int qx = p.x >= 0.5 ? 1 : 0;
      const int qy = p.y >= 0.5 ? 1 : 0;
      const int old_cell = co.old_children[qx + 2 * qy];
      const double cx = 2.0 * p.x - qx, cy = 2.0 * p.y - qy;
      for (std::size_t fi = 0; fi < fields_.size(); ++fi) {
        const Snapshot& f = fields_[fi];
        const Vec& packed = f.cell_coeffs[old_cell];
        for (int comp = 0; comp < f.components; ++comp)
          out[fi][static_cast<Eigen::Index>(f.components) * dofs[j] + comp] =
              local_value(element_, packed.segment(comp * nd, nd), cx, cy);
      }
    }
  }

  // The written nodal values are conforming except at (new) hanging nodes;
  // re-applying the constraints makes the fields consistent again.
  const ConstraintSet cs = make_scalar_constraints(new_space, {});
  for (std::size_t fi = 0; fi < fields_.size(); ++fi) {
    const int components = fields_[fi].components;
    if (components == 1) {
      cs.distribute(out[fi]);
      continue;
    }
    Vec tmp(new_space.n_dofs());
    for (int comp = 0; comp < components; ++comp) {
      for (int d = 0; d < new_space.n_dofs(); ++d)
        tmp[d] = out[fi][static_cast<Eigen::Index>(components) * d + comp];
      cs.distribute(tmp);
      for (int d = 0; d < new_space.n_dofs(); ++d)
        out[fi][static_cast<Eigen::Index>(components) * d + comp] = tmp[d];
    }
  }
  return out;
}

}  // namespace mconv
