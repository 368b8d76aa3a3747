#pragma once

// Field-level utilities on top of FunctionSpace: interpolation, point
// evaluation, quadrature integrals, norms, errors, and boundary fluxes.
// Scalar fields are coefficient vectors of length space.n_dofs(); vector
// fields interleave components (dof = scalar_dof * nc + comp).

#include <functional>

#include "mconv/space.hpp"

namespace mconv {

using ScalarFn = std::function<double(Pt)>;
using VectorFn = std::function<Vec2(Pt)>;

// Nodal interpolation (cellwise L2 projection for the modal p1disc space).
Vec interpolate(const FunctionSpace& s, const ScalarFn& f);
Vec interpolate_vector(const FunctionSpace& s, const VectorFn& f);

struct FieldSample {
  double value = 0;
  Vec2 grad = Vec2::Zero();
};

// Evaluate u_h (and its gradient) at a point; the containing cell is looked
// up through the mesh. Throws if p lies outside the domain.
FieldSample evaluate(const FunctionSpace& s, const Vec& u, Pt p);
// Vector-field variant: returns per-component samples.
std::array<FieldSample, 2> evaluate_vector(const FunctionSpace& s, const Vec& u, Pt p);

// Local coefficients of one cell, in element-local ordering.
Vec cell_coeffs(const FunctionSpace& s, const Vec& u, int active);
// Component comp of an interleaved vector field on one cell.
Vec cell_coeffs(const FunctionSpace& s, const Vec& u, int active, int nc, int comp);

// Values/physical gradients of a local coefficient vector at the tabulated
// quadrature points. Any output pointer may be null.
void eval_on_cell(const ShapeTable& table, const Mesh::CellGeom& geom, const Vec& coeffs,
                  Vec* values, Vec* grad_x, Vec* grad_y);

// Quadrature integral of the discrete field over the mesh.
double integrate(const FunctionSpace& s, const Vec& u, int quad_degree = 5);
// Quadrature integral of an analytic function.
double integrate(const Mesh& mesh, const ScalarFn& f, int quad_degree = 5);

double l2_norm(const FunctionSpace& s, const Vec& u, int quad_degree = 7);
double l2_error(const FunctionSpace& s, const Vec& u, const ScalarFn& exact,
                int quad_degree = 7);
// Interleaved 2-vector field against an exact vector solution.
double l2_error_vector(const FunctionSpace& s, const Vec& u, const VectorFn& exact,
                       int quad_degree = 7);

// Outward normal flux of coef * grad(u) across one boundary side:
// integral over the side of coef(x) * (grad u_h . n). Used for heat-flux
// style statistics.
double boundary_normal_flux(const FunctionSpace& s, const Vec& u, Side side,
                            const ScalarFn& coef, int quad_degree = 5);

// Dirichlet helper: hanging constraints plus fixed values on the given
// sides (later entries win where sides share a corner dof).
ConstraintSet make_scalar_constraints(const FunctionSpace& s,
                                      const std::vector<std::pair<Side, ScalarFn>>& bcs);

}  // namespace mconv
