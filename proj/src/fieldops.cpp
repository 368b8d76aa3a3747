#include "mconv/fieldops.hpp"

#include <cmath>

namespace mconv {

Vec interpolate(const FunctionSpace& s, const ScalarFn& f) {
  Vec u = Vec::Zero(s.n_dofs());
  if (s.element() == ElementType::p1disc) {
    // Cellwise L2 projection; the modal basis {1, xi-1/2, eta-1/2} is
    // orthogonal on the reference square with moments 1, 1/12, 1/12.
    const QuadratureRule rule = quadrature_rule(5);
    for (int a = 0; a < s.mesh().n_active(); ++a) {
      const Mesh::CellGeom g = s.mesh().cell_geom(a);
      double m0 = 0, m1 = 0, m2 = 0;
      for (int q = 0; q < rule.size(); ++q) {
        const Pt rp = rule.points[q];
        const double fv = f(g.map(rp.x, rp.y)) * rule.weights[q];
        m0 += fv;
        m1 += fv * (rp.x - 0.5);
        m2 += fv * (rp.y - 0.5);
      }
      const auto& dofs = s.cell_dofs(a);
      u[dofs[0]] = m0;
      u[dofs[1]] = 12.0 * m1;
      u[dofs[2]] = 12.0 * m2;
    }
    return u;
  }
  for (int d = 0; d < s.n_dofs(); ++d) u[d] = f(s.dof_point(d));
  return u;
}

Vec interpolate_vector(const FunctionSpace& s, const VectorFn& f) {
  require(s.element() != ElementType::p1disc,
          "vector interpolation needs a nodal space");
  Vec u = Vec::Zero(2 * s.n_dofs());
  for (int d = 0; d < s.n_dofs(); ++d) {
    const Vec2 v = f(s.dof_point(d));
    u[2 * d] = v[0];
    u[2 * d + 1] = v[1];
  }
  return u;
}

Vec cell_coeffs(const FunctionSpace& s, const Vec& u, int active) {
  const auto& dofs = s.cell_dofs(active);
  Vec c(dofs.size());
  for (std::size_t j = 0; j < dofs.size(); ++j) c[j] = u[dofs[j]];
  return c;
}

Vec cell_coeffs(const FunctionSpace& s, const Vec& u, int active, int nc, int comp) {
  const auto& dofs = s.cell_dofs(active);
  Vec c(dofs.size());
  for (std::size_t j = 0; j < dofs.size(); ++j) c[j] = u[nc * dofs[j] + comp];
  return c;
}

void eval_on_cell(const ShapeTable& table, const Mesh::CellGeom& geom, const Vec& coeffs,
                  Vec* values, Vec* grad_x, Vec* grad_y) {
  if (values) *values = table.values * coeffs;
  if (grad_x) *grad_x = (table.grad_xi * coeffs) / geom.hx;
  if (grad_y) *grad_y = (table.grad_eta * coeffs) / geom.hy;
}

FieldSample evaluate(const FunctionSpace& s, const Vec& u, Pt p) {
  const Mesh::Extent& e = s.mesh().extent();
  require(p.x >= e.x0 - 1e-12 && p.x <= e.x1 + 1e-12 && p.y >= e.y0 - 1e-12 &&
              p.y <= e.y1 + 1e-12,
          "evaluate: point outside the domain");
  double xi, eta;
  const int a = s.mesh().locate(p, &xi, &eta);
  const Mesh::CellGeom g = s.mesh().cell_geom(a);
  const int nd = fe::n_dofs(s.element());
  std::vector<double> N(nd);
  std::vector<std::array<double, 2>> dN(nd);
  fe::shape(s.element(), xi, eta, N.data());
  fe::shape_grad(s.element(), xi, eta, reinterpret_cast<double(*)[2]>(dN.data()));
  const auto& dofs = s.cell_dofs(a);
  FieldSample out;
  for (int j = 0; j < nd; ++j) {
    out.value += N[j] * u[dofs[j]];
    out.grad[0] += dN[j][0] / g.hx * u[dofs[j]];
    out.grad[1] += dN[j][1] / g.hy * u[dofs[j]];
  }
  return out;
}

std::array<FieldSample, 2> evaluate_vector(const FunctionSpace& s, const Vec& u, Pt p) {
  double xi, eta;
  const int a = s.mesh().locate(p, &xi, &eta);
  const Mesh::CellGeom g = s.mesh().cell_geom(a);
  const int nd = fe::n_dofs(s.element());
  std::vector<double> N(nd);
  std::vector<std::array<double, 2>> dN(nd);
  fe::shape(s.element(), xi, eta, N.data());
  fe::shape_grad(s.element(), xi, eta, reinterpret_cast<double(*)[2]>(dN.data()));
  const auto& dofs = s.cell_dofs(a);
  std::array<FieldSample, 2> out;
  for (int c = 0; c < 2; ++c)
    for (int j = 0; j < nd; ++j) {
      const double v = u[2 * dofs[j] + c];
      out[c].value += N[j] * v;
      out[c].grad[0] += dN[j][0] / g.hx * v;
      out[c].grad[1] += dN[j][1] / g.hy * v;
    }
  return out;
}

double integrate(const FunctionSpace& s, const Vec& u, int quad_degree) {
  const QuadratureRule rule = quadrature_rule(quad_degree);
  const ShapeTable table = tabulate(s.element(), rule);
  double sum = 0;
  Vec vals;
  for (int a = 0; a < s.mesh().n_active(); ++a) {
    const Mesh::CellGeom g = s.mesh().cell_geom(a);
    eval_on_cell(table, g, cell_coeffs(s, u, a), &vals, nullptr, nullptr);
    const double area = g.hx * g.hy;
    for (int q = 0; q < rule.size(); ++q) sum += rule.weights[q] * area * vals[q];
  }
  return sum;
}

double integrate(const Mesh& mesh, const ScalarFn& f, int quad_degree) {
  const QuadratureRule rule = quadrature_rule(quad_degree);
  double sum = 0;
  for (int a = 0; a < mesh.n_active(); ++a) {
    const Mesh::CellGeom g = mesh.cell_geom(a);
    const double area = g.hx * g.hy;
    for (int q = 0; q < rule.size(); ++q)
      sum += rule.weights[q] * area * f(g.map(rule.points[q].x, rule.points[q].y));
  }
  return sum;
}

double l2_norm(const FunctionSpace& s, const Vec& u, int quad_degree) {
  return l2_error(s, u, [](Pt) { return 0.0; }, quad_degree);
}

double l2_error(const FunctionSpace& s, const Vec& u, const ScalarFn& exact,
                int quad_degree) {
  const QuadratureRule rule = quadrature_rule(quad_degree);
  const ShapeTable table = tabulate(s.element(), rule);
  double sum = 0;
  Vec vals;
  for (int a = 0; a < s.mesh().n_active(); ++a) {
    const Mesh::CellGeom g = s.mesh().cell_geom(a);
    eval_on_cell(table, g, cell_coeffs(s, u, a), &vals, nullptr, nullptr);
    const double area = g.hx * g.hy;
    for (int q = 0; q < rule.size(); ++q) {
      const double d = vals[q] - exact(g.map(rule.points[q].x, rule.points[q].y));
      sum += rule.weights[q] * area * d * d;
    }
  }
  return std::sqrt(sum);
}

double l2_error_vector(const FunctionSpace& s, const Vec& u, const VectorFn& exact,
                       int quad_degree) {
  const QuadratureRule rule = quadrature_rule(quad_degree);
  const ShapeTable table = tabulate(s.element(), rule);
  double sum = 0;
  Vec vx, vy;
  for (int a = 0; a < s.mesh().n_active(); ++a) {
    const Mesh::CellGeom g = s.mesh().cell_geom(a);
    eval_on_cell(table, g, cell_coeffs(s, u, a, 2, 0), &vx, nullptr, nullptr);
    eval_on_cell(table, g, cell_coeffs(s, u, a, 2, 1), &vy, nullptr, nullptr);
    const double area = g.hx * g.hy;
    for (int q = 0; q < rule.size(); ++q) {
      const Vec2 ex = exact(g.map(rule.points[q].x, rule.points[q].y));
      const double dx = vx[q] - ex[0], dy = vy[q] - ex[1];
      sum += rule.weights[q] * area * (dx * dx + dy * dy);
    }
  }
  return std::sqrt(sum);
}

double boundary_normal_flux(const FunctionSpace& s, const Vec& u, Side side,
                            const ScalarFn& coef, int quad_degree) {
  std::vector<double> pts, wts;
  gauss_legendre((quad_degree + 2) / 2, pts, wts);
  const int face = static_cast<int>(side);
  // Outward normal per side, and the face parameterization in (xi, eta).
  const double nx[4] = {-1, 1, 0, 0}, ny[4] = {0, 0, -1, 1};
  const int nd = fe::n_dofs(s.element());
  std::vector<std::array<double, 2>> dN(nd);
  double flux = 0;
  for (int a = 0; a < s.mesh().n_active(); ++a) {
    if (s.mesh().boundary_side(a, face) != side) continue;
    const Mesh::CellGeom g = s.mesh().cell_geom(a);
    const auto& dofs = s.cell_dofs(a);
    const double face_len = (face < 2) ? g.hy : g.hx;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const double t = pts[k];
      const double xi = (face == 0) ? 0.0 : (face == 1) ? 1.0 : t;
      const double eta = (face == 2) ? 0.0 : (face == 3) ? 1.0 : t;
      fe::shape_grad(s.element(), xi, eta, reinterpret_cast<double(*)[2]>(dN.data()));
      double gx = 0, gy = 0;
      for (int j = 0; j < nd; ++j) {
        gx += dN[j][0] / g.hx * u[dofs[j]];
        gy += dN[j][1] / g.hy * u[dofs[j]];
      }
      flux += wts[k] * face_len * coef(g.map(xi, eta)) *
              (gx * nx[face] + gy * ny[face]);
    }
  }
  return flux;
}

ConstraintSet make_scalar_constraints(const FunctionSpace& s,
                                      const std::vector<std::pair<Side, ScalarFn>>& bcs) {
  ConstraintSet out;
  s.hanging_constraints().append_mapped(out, [](int d) { return d; });
  for (const auto& [side, fn] : bcs) {
    for (int d : s.boundary_dofs(side)) {
      out.add_line(d);
      out.set_inhomogeneity(d, fn(s.dof_point(d)));
    }
  }
  out.close(s.n_dofs());
  return out;
}

}  // namespace mconv
