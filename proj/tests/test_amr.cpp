#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mconv/amr.hpp"
#include "mconv/fieldops.hpp"

using namespace mconv;

namespace {

int count_flags(const std::vector<signed char>& flags, int which) {
  return static_cast<int>(
      std::count(flags.begin(), flags.end(), static_cast<signed char>(which)));
}

// Active cell whose center is closest to p; indices shift across adapts, so
// tests find cells by geometry.
int cell_at(const Mesh& mesh, Pt p) {
  return mesh.locate(p);
}

}  // namespace

TEST_CASE("kelly indicators vanish for linear fields and find kinks") {
  Mesh mesh = Mesh::create_rectangle({}, 4, 4);
  FunctionSpace s(mesh, ElementType::q2);
  const Vec lin = interpolate(s, [](Pt p) { return 2.0 * p.x - 3.0 * p.y + 1.0; });
  const IndicatorField flat = kelly_indicator(s, lin, "kelly:lin");
  REQUIRE(flat.values.size() == static_cast<std::size_t>(mesh.n_active()));
  CHECK(flat.provenance == "kelly:lin");
  for (double v : flat.values) CHECK(v <= 1e-12);

  // Two unit cells sharing the face x = 1, carrying v = |x - 1|: the
  // normal-gradient jump is 2 along the whole face, so
  // eta = sqrt(h_K * 2^2 * 1) = sqrt(4 sqrt(2)) on both cells.
  Mesh pair = Mesh::create_rectangle({0.0, 2.0, 0.0, 1.0}, 2, 1);
  FunctionSpace sp(pair, ElementType::q2);
  const Vec kink = interpolate(sp, [](Pt p) { return std::abs(p.x - 1.0); });
  const IndicatorField ind = kelly_indicator(sp, kink);
  const double expected = std::sqrt(4.0 * std::sqrt(2.0));
  REQUIRE(ind.values.size() == 2);
  CHECK(ind.values[0] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(ind.values[1] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("kelly indicators are local: remote refinement changes nothing") {
  Mesh mesh = Mesh::create_rectangle({0.0, 4.0, 0.0, 1.0}, 4, 1);
  const auto vee = [](Pt p) { return std::abs(p.x - 2.0); };

  FunctionSpace s(mesh, ElementType::q2);
  const IndicatorField before = kelly_indicator(s, interpolate(s, vee));
  const double left = before.values[cell_at(mesh, {1.5, 0.5})];
  const double right = before.values[cell_at(mesh, {2.5, 0.5})];
  CHECK(left == doctest::Approx(std::sqrt(4.0 * std::sqrt(2.0))).epsilon(1e-12));
  CHECK(right == doctest::Approx(left).epsilon(1e-14));
  CHECK(before.values[cell_at(mesh, {0.5, 0.5})] <= 1e-13);

  // Split the far-left cell; the kink cells keep their indicators even
  // though a hanging face appears elsewhere.
  std::vector<signed char> flags(mesh.n_active(), 0);
  flags[cell_at(mesh, {0.5, 0.5})] = 1;
  mesh.execute_refinement(flags);
  FunctionSpace s2(mesh, ElementType::q2);
  const IndicatorField after = kelly_indicator(s2, interpolate(s2, vee));
  CHECK(after.values[cell_at(mesh, {1.5, 0.5})] ==
        doctest::Approx(left).epsilon(1e-12));
  CHECK(after.values[cell_at(mesh, {2.5, 0.5})] ==
        doctest::Approx(right).epsilon(1e-12));
}

TEST_CASE("kelly indicators shrink at the estimator rate under refinement") {
  // Degree-1 interpolants of a smooth field: with the diameter-weighted
  // face integral the per-cell indicator scales like h^2 (the unweighted
  // face term alone would give h^(3/2)).
  const auto f = [](Pt p) { return std::sin(M_PI * p.x) * std::sin(M_PI * p.y); };
  std::vector<double> peak;
  for (int n : {8, 16, 32}) {
    Mesh mesh = Mesh::create_rectangle({}, n, n);
    FunctionSpace s(mesh, ElementType::q1);
    const IndicatorField ind = kelly_indicator(s, interpolate(s, f));
    peak.push_back(*std::max_element(ind.values.begin(), ind.values.end()));
  }
  const double o1 = std::log2(peak[0] / peak[1]);
  const double o2 = std::log2(peak[1] / peak[2]);
  CHECK(o1 > 1.4);
  CHECK(o1 < 2.5);
  CHECK(o2 > 1.4);
  CHECK(o2 < 2.5);
}

TEST_CASE("gradient indicator reproduces the formula and localizes steps") {
  Mesh mesh = Mesh::create_rectangle({}, 2, 2);
  const auto x_of = [&](int c) { return mesh.cell_geom(c).center().x; };
  const IndicatorField ind = gradient_indicator(x_of, mesh, "gradient:x");
  CHECK(ind.provenance == "gradient:x");
  for (double v : ind.values)
    CHECK(v == doctest::Approx(0.25).epsilon(1e-13));  // h^2 |grad x|, h = 1/2

  const IndicatorField zero =
      gradient_indicator([](int) { return 7.0; }, mesh);
  for (double v : zero.values) CHECK(v == 0.0);

  // The fit is exact for affine data on mixed-level neighborhoods too:
  // every cell reports its own area.
  Mesh mixed = Mesh::create_rectangle({}, 4, 4);
  std::vector<signed char> flags(mixed.n_active(), 0);
  flags[5] = flags[6] = 1;
  mixed.execute_refinement(flags);
  const auto xc = [&](int c) { return mixed.cell_geom(c).center().x; };
  const IndicatorField aff = gradient_indicator(xc, mixed);
  for (int c = 0; c < mixed.n_active(); ++c) {
    const double h = mixed.cell_size_measures(c).sqrt_area;
    CHECK(aff.values[c] == doctest::Approx(h * h).epsilon(1e-12));
  }

  // A step across y = 0.5 lights up exactly the two straddling layers.
  Mesh grid = Mesh::create_rectangle({}, 8, 8);
  const auto step = [&](int c) {
    return grid.cell_geom(c).center().y < 0.5 ? 1.0 : 2.0;
  };
  const IndicatorField si = gradient_indicator(step, grid);
  int lit = 0;
  for (int c = 0; c < grid.n_active(); ++c) {
    const double y = grid.cell_geom(c).center().y;
    const bool straddles = y > 0.375 && y < 0.625;  // rows 3 and 4
    if (si.values[c] > 0.0) ++lit;
    CHECK((si.values[c] > 0.0) == straddles);
  }
  CHECK(lit == 16);
}

TEST_CASE("indicator combination respects scaling, bounds, and labels") {
  IndicatorField a{"kelly:T", {4.0, 0.0, 2.0, 0.0}};
  IndicatorField b{"gradient:eta", {0.0, 3.0, 3.0, 0.0}};

  // A single entry without rescaling passes through untouched.
  const IndicatorField same =
      combine({a}, {{IndicatorScaling::none, 1.0}}, CombineMode::sum);
  for (std::size_t c = 0; c < a.values.size(); ++c)
    CHECK(same.values[c] == a.values[c]);

  const std::vector<CombineEntry> norm = {
      {IndicatorScaling::max_normalize, 1.0},
      {IndicatorScaling::max_normalize, 1.0}};
  const IndicatorField mx = combine({a, b}, norm, CombineMode::max);
  const IndicatorField sm = combine({a, b}, norm, CombineMode::sum);
  CHECK(mx.provenance == "max(kelly:T, gradient:eta)");

  for (std::size_t c = 0; c < a.values.size(); ++c) {
    CHECK(mx.values[c] >= a.values[c] / 4.0 - 1e-15);
    CHECK(mx.values[c] >= b.values[c] / 3.0 - 1e-15);
    CHECK(sm.values[c] >= mx.values[c] - 1e-15);
    CHECK(sm.values[c] <= 2.0 + 1e-15);  // each normalized entry is <= 1
  }
  // Disjoint supports under max: the union, with both peaks at 1.
  CHECK(mx.values[0] == doctest::Approx(1.0));
  CHECK(mx.values[1] == doctest::Approx(1.0));
  CHECK(mx.values[3] == 0.0);

  // Range normalization maps an all-equal entry to zero rather than
  // dividing by zero.
  IndicatorField c{"flat", {2.0, 2.0, 2.0, 2.0}};
  const IndicatorField rn = combine(
      {c}, {{IndicatorScaling::range_normalize, 1.0}}, CombineMode::max);
  for (double v : rn.values) CHECK(v == 0.0);

  IndicatorField short_one{"short", {1.0, 2.0}};
  CHECK_THROWS_AS(combine({a, short_one}, norm, CombineMode::max), Error);
  CHECK_THROWS_AS(combine({a}, norm, CombineMode::max), Error);
}

TEST_CASE("marking is count-exact, deterministic, and honors overrides") {
  Mesh mesh = Mesh::create_rectangle({}, 10, 10);
  IndicatorField uniform{"flat", std::vector<double>(100, 1.0)};

  MarkOptions opts;
  opts.refine_fraction = 0.3;
  opts.coarsen_fraction = 0.2;
  const std::vector<signed char> flags = mark_cells(uniform, mesh, opts);
  CHECK(count_flags(flags, 1) == 30);
  CHECK(count_flags(flags, -1) == 20);
  // Ties break toward the lower index: the first 30 refine, the last 20
  // coarsen.
  for (int c = 0; c < 30; ++c) CHECK(flags[c] == 1);
  for (int c = 80; c < 100; ++c) CHECK(flags[c] == -1);
  CHECK(mark_cells(uniform, mesh, opts) == flags);  // deterministic

  // Zero fractions leave only the overrides.
  MarkOptions region_only;
  region_only.regions.push_back(
      {[](const Mesh::CellGeom& g) { return g.y0 + g.hy >= 1.0 - 1e-12; },
       2});
  const std::vector<signed char> rf = mark_cells(uniform, mesh, region_only);
  CHECK(count_flags(rf, 1) == 10);  // the top row sits below level 2
  CHECK(count_flags(rf, -1) == 0);
  for (int c = 0; c < 100; ++c)
    CHECK((rf[c] == 1) == (mesh.cell_geom(c).y0 + mesh.cell_geom(c).hy >=
                           1.0 - 1e-12));

  // max_level vetoes refinement, min_level vetoes coarsening.
  MarkOptions capped;
  capped.refine_fraction = 1.0;
  capped.max_level = 0;
  CHECK(count_flags(mark_cells(uniform, mesh, capped), 1) == 0);

  Mesh fine = Mesh::create_rectangle({}, 10, 10);
  fine.refine_globally();
  IndicatorField uniform_fine{"flat", std::vector<double>(400, 1.0)};
  MarkOptions floored;
  floored.coarsen_fraction = 1.0;
  floored.min_level = 1;
  CHECK(count_flags(mark_cells(uniform_fine, fine, floored), -1) == 0);

  MarkOptions bad;
  bad.refine_fraction = 0.7;
  bad.coarsen_fraction = 0.7;
  CHECK_THROWS_AS(mark_cells(uniform, mesh, bad), Error);
  bad.refine_fraction = 1.3;
  CHECK_THROWS_AS(mark_cells(uniform, mesh, bad), Error);
}

TEST_CASE("a region rule reaches its level after two adapt cycles") {
  Mesh mesh = Mesh::create_rectangle({}, 4, 4);
  mesh.refine_globally();  // start all cells at level 1

  MarkOptions opts;
  opts.regions.push_back(
      {[](const Mesh::CellGeom& g) { return g.y0 + g.hy >= 1.0 - 1e-12; },
       3});
  IndicatorField quiet{"flat", {}};
  for (int cycle = 0; cycle < 2; ++cycle) {
    quiet.values.assign(mesh.n_active(), 0.0);
    mesh.execute_refinement(mark_cells(quiet, mesh, opts));
    CHECK(mesh.is_two_to_one_balanced());
  }
  for (int c = 0; c < mesh.n_active(); ++c) {
    const Mesh::CellGeom g = mesh.cell_geom(c);
    if (g.y0 + g.hy >= 1.0 - 1e-12) CHECK(mesh.cell_level(c) >= 3);
  }
}

TEST_CASE("solution transfer is exact where the algebra says so") {
  // Refining only: the children's space contains the parent's, so any q2
  // field carries over exactly.
  Mesh mesh = Mesh::create_rectangle({}, 4, 4);
  FunctionSpace s(mesh, ElementType::q2);
  const auto quad = [](Pt p) { return p.x * p.x + 3.0 * p.x * p.y - p.y * p.y; };
  SolutionTransfer tr(s);
  tr.add_field(interpolate(s, quad));

  std::vector<signed char> flags(mesh.n_active(), 0);
  flags[0] = flags[5] = flags[7] = 1;
  const Mesh::AdaptResult rec = mesh.execute_refinement(flags);
  FunctionSpace s2(mesh, ElementType::q2);
  const Vec moved = tr.interpolate(s2, rec)[0];
  const Vec fresh = interpolate(s2, quad);
  CHECK((moved - fresh).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("constants and linears survive adapt round trips") {
  // A mixed refine/coarsen cycle cannot disturb a constant.
  Mesh mesh = Mesh::create_rectangle({}, 4, 4);
  mesh.refine_globally();
  FunctionSpace s(mesh, ElementType::q2);
  SolutionTransfer tr(s);
  tr.add_field(Vec::Constant(s.n_dofs(), 4.25));
  std::vector<signed char> flags(mesh.n_active(), -1);
  flags[0] = 1;
  const Mesh::AdaptResult rec = mesh.execute_refinement(flags);
  FunctionSpace s2(mesh, ElementType::q2);
  const Vec c = tr.interpolate(s2, rec)[0];
  CHECK((c.array() - 4.25).abs().maxCoeff() <= 1e-14);

  // Refine everything, inject back down: linears return bit-close.
  Mesh two = Mesh::create_rectangle({}, 2, 2);
  FunctionSpace t0(two, ElementType::q2);
  const auto lin = [](Pt p) { return 1.0 + 2.0 * p.x - p.y; };
  const Vec original = interpolate(t0, lin);

  SolutionTransfer up(t0);
  up.add_field(original);
  const Mesh::AdaptResult r1 =
      two.execute_refinement(std::vector<signed char>(two.n_active(), 1));
  FunctionSpace t1(two, ElementType::q2);
  const Vec fine = up.interpolate(t1, r1)[0];

  SolutionTransfer down(t1);
  down.add_field(fine);
  const Mesh::AdaptResult r2 =
      two.execute_refinement(std::vector<signed char>(two.n_active(), -1));
  FunctionSpace t2(two, ElementType::q2);
  const Vec back = down.interpolate(t2, r2)[0];
  REQUIRE(back.size() == original.size());
  CHECK((back - original).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("vector fields transfer componentwise with constraints applied") {
  Mesh mesh = Mesh::create_rectangle({}, 4, 4);
  FunctionSpace s(mesh, ElementType::q2);
  const auto uf = [](Pt p) { return Vec2{p.x + 2.0 * p.y, 3.0 * p.x - p.y}; };
  SolutionTransfer tr(s);
  tr.add_field(interpolate_vector(s, uf), 2);
  CHECK_THROWS_AS(tr.add_field(Vec::Zero(7)), Error);

  std::vector<signed char> flags(mesh.n_active(), 0);
  flags[0] = 1;  // corner refinement introduces hanging nodes
  const Mesh::AdaptResult rec = mesh.execute_refinement(flags);
  FunctionSpace s2(mesh, ElementType::q2);
  const Vec moved = tr.interpolate(s2, rec)[0];
  const Vec fresh = interpolate_vector(s2, uf);
  CHECK((moved - fresh).cwiseAbs().maxCoeff() <= 1e-13);
}
