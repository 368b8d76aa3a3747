#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mconv/fieldops.hpp"
#include "mconv/space.hpp"

using namespace mconv;

TEST_CASE("gauss rules on the unit interval") {
  std::vector<double> p, w;

  gauss_legendre(1, p, w);
  CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(w[0] == doctest::Approx(1.0).epsilon(1e-15));

  gauss_legendre(2, p, w);
  CHECK(p[0] == doctest::Approx(0.21132486540518711775).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(0.78867513459481288225).epsilon(1e-15));
  CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-15));

  gauss_legendre(3, p, w);
  CHECK(p[0] == doctest::Approx(0.11270166537925831148).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(p[2] == doctest::Approx(0.88729833462074168852).epsilon(1e-15));
  CHECK(w[0] == doctest::Approx(0.27777777777777777778).epsilon(1e-15));
  CHECK(w[1] == doctest::Approx(0.44444444444444444444).epsilon(1e-15));

  gauss_legendre(5, p, w);
  CHECK(p[0] == doctest::Approx(0.046910077030668003601).epsilon(1e-14));
  CHECK(w[2] == doctest::Approx(0.28444444444444444444).epsilon(1e-14));

  for (int n = 1; n <= 8; ++n) {
    gauss_legendre(n, p, w);
    double sum = 0;
    for (double v : w) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    // Exactness through degree 2n-1: check the hardest monomial.
    double integral = 0;
    for (int i = 0; i < n; ++i) integral += w[i] * std::pow(p[i], 2 * n - 1);
    CHECK(integral == doctest::Approx(1.0 / (2.0 * n)).epsilon(1e-13));
  }
}

TEST_CASE("tensor quadrature on the reference square") {
  CHECK(quadrature_rule(1).size() == 1);
  CHECK(quadrature_rule(1).weights[0] == doctest::Approx(1.0));

  const QuadratureRule r3 = quadrature_rule(3);
  CHECK(r3.size() == 4);
  double sum = 0;
  for (double w : r3.weights) sum += w;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));

  // Degree-5 rule integrates x^2 y^2 exactly: 1/3 * 1/3.
  const QuadratureRule r5 = quadrature_rule(5);
  CHECK(r5.size() == 9);
  double ixy = 0;
  for (int q = 0; q < r5.size(); ++q)
    ixy += r5.weights[q] * r5.points[q].x * r5.points[q].x * r5.points[q].y *
           r5.points[q].y;
  CHECK(ixy == doctest::Approx(1.0 / 9.0).epsilon(1e-14));
}

TEST_CASE("shape functions: nodal delta property and partition of unity") {
  for (ElementType type : {ElementType::q1, ElementType::q2}) {
    const int nd = fe::n_dofs(type);
    std::vector<double> N(nd);
    for (int i = 0; i < nd; ++i) {
      const Pt ni = fe::node(type, i);
      fe::shape(type, ni.x, ni.y, N.data());
      for (int j = 0; j < nd; ++j)
        CHECK(N[j] == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-14));
    }
    for (double xi : {0.13, 0.71}) {
      for (double eta : {0.29, 0.97}) {
        fe::shape(type, xi, eta, N.data());
        double sum = 0;
        for (double v : N) sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-13));
      }
    }
  }
  // Modal affine basis.
  double N[3];
  fe::shape(ElementType::p1disc, 0.75, 0.25, N);
  CHECK(N[0] == doctest::Approx(1.0));
  CHECK(N[1] == doctest::Approx(0.25));
  CHECK(N[2] == doctest::Approx(-0.25));
}

TEST_CASE("shape gradients match finite differences") {
  const double eps = 1e-6;
  for (ElementType type : {ElementType::q1, ElementType::q2, ElementType::p1disc}) {
    const int nd = fe::n_dofs(type);
    std::vector<double> np(nd), nm(nd);
    std::vector<std::array<double, 2>> g(nd);
    const double xi = 0.37, eta = 0.58;
    fe::shape_grad(type, xi, eta, reinterpret_cast<double(*)[2]>(g.data()));
    fe::shape(type, xi + eps, eta, np.data());
    fe::shape(type, xi - eps, eta, nm.data());
    for (int j = 0; j < nd; ++j)
      CHECK(g[j][0] == doctest::Approx((np[j] - nm[j]) / (2 * eps)).epsilon(1e-7));
    fe::shape(type, xi, eta + eps, np.data());
    fe::shape(type, xi, eta - eps, nm.data());
    for (int j = 0; j < nd; ++j)
      CHECK(g[j][1] == doctest::Approx((np[j] - nm[j]) / (2 * eps)).epsilon(1e-7));
  }
}

TEST_CASE("dof counts on uniform meshes") {
  const Mesh m = Mesh::create_rectangle({0, 1, 0, 1}, 2, 2);
  CHECK(FunctionSpace(m, ElementType::q1).n_dofs() == 9);
  CHECK(FunctionSpace(m, ElementType::q2).n_dofs() == 25);
  CHECK(FunctionSpace(m, ElementType::p1disc).n_dofs() == 12);
  CHECK(FunctionSpace(m, ElementType::q1).hanging_constraints().n_constraints() == 0);
  CHECK(FunctionSpace(m, ElementType::q2).hanging_constraints().n_constraints() == 0);
}

TEST_CASE("hanging constraints: bilinear midpoint weights") {
  Mesh m = Mesh::create_rectangle({0, 2, 0, 1}, 2, 1);
  std::vector<signed char> flags(2, 0);
  flags[0] = 1;
  m.execute_refinement(flags);

  const FunctionSpace s(m, ElementType::q1);
  const auto& cs = s.hanging_constraints();
  CHECK(cs.n_constraints() == 1);
  const auto& line = cs.lines()[0];
  // The hanging vertex sits at (1, 0.5), constrained to the coarse edge
  // endpoints (1,0) and (1,1) with weights 1/2, 1/2.
  CHECK(s.dof_point(line.dof).x == doctest::Approx(1.0));
  CHECK(s.dof_point(line.dof).y == doctest::Approx(0.5));
  REQUIRE(line.entries.size() == 2);
  for (const auto& [master, w] : line.entries) {
    CHECK(w == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s.dof_point(master).x == doctest::Approx(1.0));
  }
}

TEST_CASE("hanging constraints: biquadratic quarter-point weights") {
  Mesh m = Mesh::create_rectangle({0, 2, 0, 1}, 2, 1);
  std::vector<signed char> flags(2, 0);
  flags[0] = 1;
  m.execute_refinement(flags);

  const FunctionSpace s(m, ElementType::q2);
  const auto& cs = s.hanging_constraints();
  // Fine-edge midpoints at (1, 1/4) and (1, 3/4) hang; the shared vertex at
  // (1, 1/2) coincides with the coarse edge midpoint dof and is identified.
  CHECK(cs.n_constraints() == 2);
  for (const auto& line : cs.lines()) {
    const Pt p = s.dof_point(line.dof);
    CHECK(p.x == doctest::Approx(1.0));
    const bool lower = std::abs(p.y - 0.25) < 1e-12;
    CHECK((lower || std::abs(p.y - 0.75) < 1e-12));
    REQUIRE(line.entries.size() == 3);
    double sum = 0;
    for (const auto& [master, w] : line.entries) {
      const double my = s.dof_point(master).y;
      // Quadratic edge basis evaluated at s = 1/4 (or mirrored at 3/4).
      const double expected = (my == doctest::Approx(0.5))  ? 0.75
                              : (std::abs(my - (lower ? 0.0 : 1.0)) < 1e-12) ? 0.375
                                                                             : -0.125;
      CHECK(w == doctest::Approx(expected).epsilon(1e-14));
      sum += w;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("hanging interpolation is conforming across the interface") {
  Mesh m = Mesh::create_rectangle({0, 2, 0, 1}, 2, 1);
  std::vector<signed char> flags(2, 0);
  flags[1] = 1;
  m.execute_refinement(flags);

  for (ElementType type : {ElementType::q1, ElementType::q2}) {
    const FunctionSpace s(m, type);
    // A polynomial of the element's degree interpolates exactly; after
    // distribute() the hanging dofs agree with the coarse-side trace, so
    // evaluation from either side matches.
    auto f = [type](Pt p) {
      return type == ElementType::q1 ? (2 * p.x - 3 * p.y + 1)
                                     : (p.x * p.x - p.x * p.y + 2 * p.y);
    };
    Vec u = interpolate(s, f);
    s.hanging_constraints().distribute(u);
    for (double y : {0.1, 0.4, 0.55, 0.9}) {
      const Pt left{1.0 - 1e-9, y}, right{1.0 + 1e-9, y};
      CHECK(evaluate(s, u, left).value ==
            doctest::Approx(evaluate(s, u, right).value).epsilon(1e-7));
    }
    CHECK(l2_error(s, u, f) < 1e-13);
  }
}

TEST_CASE("distribute is idempotent") {
  Mesh m = Mesh::create_rectangle({0, 1, 0, 1}, 2, 2);
  std::vector<signed char> flags(4, 0);
  flags[0] = 1;
  flags[3] = 1;
  m.execute_refinement(flags);
  const FunctionSpace s(m, ElementType::q2);

  Vec u(s.n_dofs());
  for (int i = 0; i < u.size(); ++i) u[i] = std::sin(1.0 + 3.7 * i);
  Vec once = u;
  s.hanging_constraints().distribute(once);
  Vec twice = once;
  s.hanging_constraints().distribute(twice);
  CHECK((once - twice).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("interpolation reproduces polynomials and converges at p+1") {
  // Exactness of degree-p interpolation on a hanging mesh.
  Mesh m = Mesh::create_rectangle({0, 1, 0, 1}, 2, 2);
  std::vector<signed char> flags(4, 0);
  flags[2] = 1;
  m.execute_refinement(flags);

  const FunctionSpace q1(m, ElementType::q1);
  Vec u1 = interpolate(q1, [](Pt p) { return 4 - p.x + 2 * p.y; });
  CHECK(l2_error(q1, u1, [](Pt p) { return 4 - p.x + 2 * p.y; }) < 1e-14);

  const FunctionSpace q2(m, ElementType::q2);
  Vec u2 = interpolate(q2, [](Pt p) { return p.x * p.x * p.y - p.y * p.y + 3; });
  CHECK(l2_error(q2, u2, [](Pt p) { return p.x * p.x * p.y - p.y * p.y + 3; }) < 1e-13);

  const FunctionSpace pd(m, ElementType::p1disc);
  Vec ud = interpolate(pd, [](Pt p) { return 1 + 2 * p.x - p.y; });
  CHECK(l2_error(pd, ud, [](Pt p) { return 1 + 2 * p.x - p.y; }) < 1e-14);

  // Convergence order on a smooth field.
  auto f = [](Pt p) { return std::sin(M_PI * p.x) * std::sin(M_PI * p.y); };
  for (ElementType type : {ElementType::q1, ElementType::q2}) {
    std::vector<double> errs;
    for (int lvl = 2; lvl <= 4; ++lvl) {
      Mesh mm = Mesh::create_rectangle({0, 1, 0, 1}, 1, 1);
      mm.refine_globally(lvl);
      const FunctionSpace s(mm, type);
      errs.push_back(l2_error(s, interpolate(s, f), f, 9));
    }
    const double expected = fe::degree(type) + 1.0;
    for (std::size_t i = 1; i < errs.size(); ++i) {
      const double order = std::log2(errs[i - 1] / errs[i]);
      CHECK(order == doctest::Approx(expected).epsilon(0.05));
    }
  }
}

TEST_CASE("integration of interpolants") {
  Mesh m = Mesh::create_rectangle({0, 2, 0, 1}, 2, 1);
  std::vector<signed char> flags(2, 0);
  flags[0] = 1;
  m.execute_refinement(flags);

  const FunctionSpace s(m, ElementType::q1);
  CHECK(integrate(s, interpolate(s, [](Pt) { return 1.0; })) ==
        doctest::Approx(2.0).epsilon(1e-14));
  CHECK(integrate(m, [](Pt p) { return p.x; }) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("point evaluation returns values and gradients") {
  Mesh m = Mesh::create_rectangle({0, 1, 0, 1}, 4, 4);
  const FunctionSpace s(m, ElementType::q2);
  const Vec u = interpolate(s, [](Pt p) { return p.x * p.x + 3 * p.y; });
  const FieldSample fs = evaluate(s, u, {0.3, 0.62});
  CHECK(fs.value == doctest::Approx(0.09 + 1.86).epsilon(1e-13));
  CHECK(fs.grad[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(fs.grad[1] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK_THROWS_AS(evaluate(s, u, {1.5, 0.5}), Error);
}

TEST_CASE("boundary dofs and normal flux") {
  Mesh m = Mesh::create_rectangle({0, 1, 0, 1}, 4, 4);
  const FunctionSpace q2(m, ElementType::q2);
  CHECK(q2.boundary_dofs(Side::top).size() == 9);
  CHECK(q2.boundary_dofs(Side::left).size() == 9);
  CHECK(q2.boundary_dofs().size() == 32);

  // T = y: outward normal flux of grad(T) is +1 at the top, -1 at the
  // bottom, 0 on the sides.
  const Vec u = interpolate(q2, [](Pt p) { return p.y; });
  auto one = [](Pt) { return 1.0; };
  CHECK(boundary_normal_flux(q2, u, Side::top, one) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(boundary_normal_flux(q2, u, Side::bottom, one) == doctest::Approx(-1.0).epsilon(1e-13));
  CHECK(boundary_normal_flux(q2, u, Side::left, one) == doctest::Approx(0.0).epsilon(1e-13));
}

TEST_CASE("dirichlet constraints interpolate boundary data") {
  Mesh m = Mesh::create_rectangle({0, 1, 0, 1}, 2, 2);
  std::vector<signed char> flags(4, 0);
  flags[1] = 1;
  m.execute_refinement(flags);
  const FunctionSpace s(m, ElementType::q2);

  const ConstraintSet cs = make_scalar_constraints(
      s, {{Side::top, [](Pt) { return 2.0; }}, {Side::bottom, [](Pt p) { return p.x; }}});
  Vec u = Vec::Zero(s.n_dofs());
  cs.distribute(u);
  CHECK(evaluate(s, u, {0.5, 1.0}).value == doctest::Approx(2.0));
  CHECK(evaluate(s, u, {0.25, 0.0}).value == doctest::Approx(0.25));
}

TEST_CASE("scatter eliminates constrained dofs symmetrically") {
  // Assemble a Q1 mass matrix on a hanging mesh through the constraint
  // scatter and verify symmetry plus the constant-function integral.
  Mesh m = Mesh::create_rectangle({0, 1, 0, 1}, 2, 2);
  std::vector<signed char> flags(4, 0);
  flags[3] = 1;
  m.execute_refinement(flags);
  const FunctionSpace s(m, ElementType::q1);
  const ConstraintSet& cs = s.hanging_constraints();

  const QuadratureRule rule = quadrature_rule(3);
  const ShapeTable table = tabulate(ElementType::q1, rule);
  std::vector<Eigen::Triplet<double>> trips;
  Vec rhs = Vec::Zero(s.n_dofs());
  for (int a = 0; a < m.n_active(); ++a) {
    const auto g = m.cell_geom(a);
    MatX local = MatX::Zero(4, 4);
    Vec lrhs = Vec::Zero(4);
    for (int q = 0; q < rule.size(); ++q) {
      const double jxw = rule.weights[q] * g.hx * g.hy;
      for (int i = 0; i < 4; ++i) {
        lrhs[i] += table.values(q, i) * jxw;
        for (int j = 0; j < 4; ++j)
          local(i, j) += table.values(q, i) * table.values(q, j) * jxw;
      }
    }
    cs.scatter(local, lrhs, s.cell_dofs(a), trips, rhs);
  }
  cs.append_placeholder_rows(trips);
  SpMat M(s.n_dofs(), s.n_dofs());
  M.setFromTriplets(trips.begin(), trips.end());

  const SpMat Mt = SpMat(M.transpose());
  double asym = 0, scale = 0;
  for (int k = 0; k < M.outerSize(); ++k)
    for (SpMat::InnerIterator it(M, k); it; ++it) {
      asym = std::max(asym, std::abs(it.value() - Mt.coeff(it.row(), it.col())));
      scale = std::max(scale, std::abs(it.value()));
    }
  CHECK(asym <= 1e-12 * scale);

  // 1' M 1 over free dofs equals the domain area (constraint weights sum
  // to one, so mass lost to constrained rows reappears on masters).
  Vec ones = Vec::Ones(s.n_dofs());
  cs.set_zero(ones);
  // Constrained entries must NOT contribute: placeholder rows carry 1.
  double area = ones.dot(M * ones);
  CHECK(area == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(rhs.sum() == doctest::Approx(1.0).epsilon(1e-13));
}
