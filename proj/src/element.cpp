#include "mconv/element.hpp"

#include <cmath>

namespace mconv {
namespace fe {

int n_dofs(ElementType type) {
  switch (type) {
    case ElementType::q1: return 4;
    case ElementType::q2: return 9;
    case ElementType::p1disc: return 3;
  }
  MC_ASSERT(false, "unknown element type");
}

int degree(ElementType type) {
  switch (type) {
    case ElementType::q1: return 1;
    case ElementType::q2: return 2;
    case ElementType::p1disc: return 1;
  }
  MC_ASSERT(false, "unknown element type");
}

bool is_continuous(ElementType type) { return type != ElementType::p1disc; }

double lagrange_1d(int n_nodes, int i, double t) {
  const double h = 1.0 / (n_nodes - 1);
  double v = 1.0;
  for (int m = 0; m < n_nodes; ++m) {
    if (m == i) continue;
    v *= (t - m * h) / ((i - m) * h);
  }
  return v;
}

double lagrange_1d_deriv(int n_nodes, int i, double t) {
  const double h = 1.0 / (n_nodes - 1);
  double sum = 0.0;
  for (int k = 0; k < n_nodes; ++k) {
    if (k == i) continue;
    double term = 1.0 / ((i - k) * h);
    for (int m = 0; m < n_nodes; ++m) {
      if (m == i || m == k) continue;
      term *= (t - m * h) / ((i - m) * h);
    }
    sum += term;
  }
  return sum;
}

double lagrange_1d_deriv2(int n_nodes, int i, double t) {
  const double h = 1.0 / (n_nodes - 1);
  double sum = 0.0;
  for (int k = 0; k < n_nodes; ++k) {
    if (k == i) continue;
    for (int l = 0; l < n_nodes; ++l) {
      if (l == i || l == k) continue;
      double term = 1.0 / ((i - k) * h) / ((i - l) * h);
      for (int m = 0; m < n_nodes; ++m) {
        if (m == i || m == k || m == l) continue;
        term *= (t - m * h) / ((i - m) * h);
      }
      sum += term;
    }
  }
  return sum;
}

Pt node(ElementType type, int dof) {
  switch (type) {
    case ElementType::q1:
      return {double(dof & 1), double((dof >> 1) & 1)};
    case ElementType::q2:
      return {(dof % 3) * 0.5, (dof / 3) * 0.5};
    case ElementType::p1disc:
      return {0.5, 0.5};
  }
  MC_ASSERT(false, "unknown element type");
}

void shape(ElementType type, double xi, double eta, double* values) {
  switch (type) {
    case ElementType::q1:
      for (int j = 0; j < 4; ++j)
        values[j] = lagrange_1d(2, j & 1, xi) * lagrange_1d(2, (j >> 1) & 1, eta);
      return;
    case ElementType::q2:
      for (int j = 0; j < 9; ++j)
        values[j] = lagrange_1d(3, j % 3, xi) * lagrange_1d(3, j / 3, eta);
      return;
    case ElementType::p1disc:
      values[0] = 1.0;
      values[1] = xi - 0.5;
      values[2] = eta - 0.5;
      return;
  }
  MC_ASSERT(false, "unknown element type");
}

void shape_grad(ElementType type, double xi, double eta, double grads[][2]) {
  switch (type) {
    case ElementType::q1:
      for (int j = 0; j < 4; ++j) {
        const int jx = j & 1, jy = (j >> 1) & 1;
        grads[j][0] = lagrange_1d_deriv(2, jx, xi) * lagrange_1d(2, jy, eta);
        grads[j][1] = lagrange_1d(2, jx, xi) * lagrange_1d_deriv(2, jy, eta);
      }
      return;
    case ElementType::q2:
      for (int j = 0; j < 9; ++j) {
        const int jx = j % 3, jy = j / 3;
        grads[j][0] = lagrange_1d_deriv(3, jx, xi) * lagrange_1d(3, jy, eta);
        grads[j][1] = lagrange_1d(3, jx, xi) * lagrange_1d_deriv(3, jy, eta);
      }
      return;
    case ElementType::p1disc:
      grads[0][0] = 0.0; grads[0][1] = 0.0;
      grads[1][0] = 1.0; grads[1][1] = 0.0;
      grads[2][0] = 0.0; grads[2][1] = 1.0;
      return;
  }
  MC_ASSERT(false, "unknown element type");
}

}  // namespace fe

void gauss_legendre(int n, std::vector<double>& points, std::vector<double>& weights) {
  require(n >= 1, "gauss_legendre: need at least one point");
  points.resize(n);
  weights.resize(n);
  // Newton iteration on the Legendre polynomial P_n over [-1,1], then map to
  // [0,1]. Chebyshev-based initial guesses converge in a handful of steps.
  for (int k = 0; k < (n + 1) / 2; ++k) {
    double x = std::cos(M_PI * (k + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int m = 2; m <= n; ++m) {
        const double p2 = ((2 * m - 1) * x * p1 - (m - 1) * p0) / m;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    points[k] = 0.5 * (1.0 - x);  // roots found in descending order -> ascend
    points[n - 1 - k] = 0.5 * (1.0 + x);
    weights[k] = 0.5 * w;
    weights[n - 1 - k] = 0.5 * w;
  }
  if (n % 2 == 1) {
    points[n / 2] = 0.5;
    // Weight for the midpoint root: recompute dp at x = 0.
    double p0 = 1.0, p1 = 0.0;
    for (int m = 2; m <= n; ++m) {
      const double p2 = (-(m - 1) * p0) / m;
      p0 = p1;
      p1 = p2;
    }
    const double dp = n * (0.0 * p1 - p0) / (0.0 - 1.0);
    weights[n / 2] = 0.5 * 2.0 / (dp * dp);
  }
}

QuadratureRule quadrature_rule(int degree) {
  require(degree >= 1, "quadrature_rule: degree must be >= 1");
  const int n = (degree + 2) / 2;  // exact through 2n-1 >= degree
  std::vector<double> p, w;
  gauss_legendre(n, p, w);
  QuadratureRule rule;
  rule.points.reserve(n * n);
  rule.weights.reserve(n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      rule.points.push_back({p[i], p[j]});
      rule.weights.push_back(w[i] * w[j]);
    }
  return rule;
}

ShapeTable tabulate(ElementType type, const QuadratureRule& rule) {
  ShapeTable t;
  t.n_dofs = fe::n_dofs(type);
  t.n_points = rule.size();
  t.values.resize(t.n_points, t.n_dofs);
  t.grad_xi.resize(t.n_points, t.n_dofs);
  t.grad_eta.resize(t.n_points, t.n_dofs);
  std::vector<double> vals(t.n_dofs);
  std::vector<std::array<double, 2>> grads(t.n_dofs);
  for (int q = 0; q < t.n_points; ++q) {
    fe::shape(type, rule.points[q].x, rule.points[q].y, vals.data());
    fe::shape_grad(type, rule.points[q].x, rule.points[q].y,
                   reinterpret_cast<double(*)[2]>(grads.data()));
    for (int j = 0; j < t.n_dofs; ++j) {
      t.values(q, j) = vals[j];
      t.grad_xi(q, j) = grads[j][0];
      t.grad_eta(q, j) = grads[j][1];
    }
  }
  return t;
}

HessTable tabulate_hessian(ElementType type, const QuadratureRule& rule) {
  const int nd = fe::n_dofs(type);
  const int np = rule.size();
  HessTable t;
  t.hess_xi = MatX::Zero(np, nd);
  t.hess_eta = MatX::Zero(np, nd);
  if (type == ElementType::p1disc) return t;  // affine: all second derivatives 0
  const int n1 = (type == ElementType::q1) ? 2 : 3;
  for (int q = 0; q < np; ++q) {
    const double xi = rule.points[q].x, eta = rule.points[q].y;
    for (int j = 0; j < nd; ++j) {
      const int jx = j % n1, jy = j / n1;
      t.hess_xi(q, j) =
          fe::lagrange_1d_deriv2(n1, jx, xi) * fe::lagrange_1d(n1, jy, eta);
      t.hess_eta(q, j) =
          fe::lagrange_1d(n1, jx, xi) * fe::lagrange_1d_deriv2(n1, jy, eta);
    }
  }
  return t;
}

}  // namespace mconv
