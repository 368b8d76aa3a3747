#pragma once

// Reference-cell finite elements on the unit square [0,1]^2 and tensor
// Gauss quadrature. All mesh cells are axis-aligned rectangles, so the
// geometry map is affine and gradients transform by 1/hx, 1/hy per axis.

#include <vector>

#include "mconv/types.hpp"

namespace mconv {

enum class ElementType {
  q1,      // continuous bilinear, 4 nodes (corners)
  q2,      // continuous biquadratic, 9 nodes (3x3 lattice)
  p1disc,  // discontinuous affine, 3 modal dofs {1, xi-1/2, eta-1/2}
};

namespace fe {

int n_dofs(ElementType type);
int degree(ElementType type);
bool is_continuous(ElementType type);

// Reference coordinates of the node associated with each dof. Nodal
// elements use a lexicographic lattice (x fastest): q1 -> corners in
// SW,SE,NW,NE order; q2 -> 3x3 grid at {0,1/2,1}^2. p1disc dofs are modal
// coefficients; their reported "node" is the cell center for all three.
Pt node(ElementType type, int dof);

// Shape function values / reference-coordinate gradients at (xi, eta).
// Arrays must hold n_dofs(type) entries.
void shape(ElementType type, double xi, double eta, double* values);
void shape_grad(ElementType type, double xi, double eta, double grads[][2]);

// 1D Lagrange basis on equispaced nodes {0, 1/(n-1), ..., 1}; used for the
// tensor bases above and for edge restrictions in constraint building.
double lagrange_1d(int n_nodes, int i, double t);
double lagrange_1d_deriv(int n_nodes, int i, double t);
double lagrange_1d_deriv2(int n_nodes, int i, double t);

}  // namespace fe

// Tensor-product Gauss-Legendre rule on [0,1]^2; weights sum to 1 (the
// reference measure), so physical integrals scale by the cell area.
struct QuadratureRule {
  std::vector<Pt> points;
  std::vector<double> weights;
  int size() const { return static_cast<int>(points.size()); }
};

// n-point Gauss-Legendre nodes/weights on [0,1]; exact through degree 2n-1.
void gauss_legendre(int n, std::vector<double>& points, std::vector<double>& weights);

// Tensor rule exact for total degree `degree` per axis (n = ceil((degree+1)/2)).
QuadratureRule quadrature_rule(int degree);

// Shape values and reference gradients tabulated at each quadrature point:
// values(q, j), grad_xi(q, j), grad_eta(q, j).
struct ShapeTable {
  int n_dofs = 0;
  int n_points = 0;
  MatX values, grad_xi, grad_eta;
};

ShapeTable tabulate(ElementType type, const QuadratureRule& rule);

// Pure second reference derivatives, hess_xi(q, j) = d2N_j/dxi2 and
// hess_eta(q, j) = d2N_j/deta2, for strong-form residual evaluation
// (the affine map has no cross terms, so these give the Laplacian).
struct HessTable {
  MatX hess_xi, hess_eta;
};

HessTable tabulate_hessian(ElementType type, const QuadratureRule& rule);

}  // namespace mconv
