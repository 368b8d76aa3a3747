#include "mconv/energy.hpp"

#include <algorithm>
#include <cmath>

#include "mconv/fieldops.hpp"
#include "mconv/linalg.hpp"
#include "mconv/parallel.hpp"

namespace mconv {

std::array<double, 3> bdf_weights(double r) {
  require(r >= 0.0, "bdf_weights: step ratio must be nonnegative");
  if (r == 0.0) return {1.0, -1.0, 0.0};
  return {(1.0 + 2.0 * r) / (1.0 + r), -(1.0 + r), r * r / (1.0 + r)};
}

EnergySolver::EnergySolver(Mesh& mesh, const MaterialModel& material,
                           EnergyOptions opts, ThermalBCs bcs)
    : mesh_(mesh),
      material_(material),
      opts_(std::move(opts)),
      bcs_(std::move(bcs)),
      space_(mesh, ElementType::q2) {
  opts_.formulation.validate();
  std::vector<std::pair<Side, ScalarFn>> fixed;
  for (int s = 0; s < 4; ++s) {
    const ThermalBC& bc = bcs_[s];
    if (bc.kind != ThermalBC::Kind::fixed) continue;
    require(static_cast<bool>(bc.value), "fixed thermal boundary needs a value");
    fixed.emplace_back(static_cast<Side>(s), bc.value);
  }
  cs_ = make_scalar_constraints(space_, fixed);
}

void EnergySolver::assemble(const BdfState& state, const Vec* velocity,
                            double time) {
  const int n = space_.n_dofs();
  const int nc = mesh_.n_active();
  const bool steady = state.dt <= 0.0;
  const bool has_u = velocity != nullptr;
  if (has_u)
    require(velocity->size() == 2 * n, "velocity field does not match the mesh");

  if (steady) {
    bool any_fixed = false;
    for (const ThermalBC& bc : bcs_)
      if (bc.kind == ThermalBC::Kind::fixed) any_fixed = true;
    if (!any_fixed)
      fail("steady energy problem with flux conditions on every side is "
           "singular (constant nullspace); fix the temperature on at least "
           "one boundary");
  } else {
    require(state.T_old != nullptr && state.T_old->size() == n,
            "time stepping needs the previous temperature");
    if (state.step >= 2) {
      if (state.T_older == nullptr || state.dt_old <= 0.0)
        fail("BDF-2 step " + std::to_string(state.step) +
             " is missing its second history level");
      require(state.T_older->size() == n,
              "temperature history does not match the mesh");
    }
  }
  const bool bdf2 = !steady && state.step >= 2;
  const bool expl = opts_.explicit_advection && !steady;
  const double r = bdf2 ? state.dt / state.dt_old : 0.0;
  const std::array<double, 3> w_bdf = bdf_weights(r);
  const double a0 = steady ? 0.0 : w_bdf[0] / state.dt;
  const double a1 = steady ? 0.0 : w_bdf[1] / state.dt;
  const double a2 = steady ? 0.0 : w_bdf[2] / state.dt;

  const bool anelastic =
      opts_.formulation.approximation == Approximation::tala ||
      opts_.formulation.approximation == Approximation::ala;

  // Temperature scale normalizing the stabilization residual: the largest
  // deviation from the mean of the previous solution. A (numerically)
  // uniform field has nothing to stabilize, so the residual limiter is
  // dropped instead of dividing by a vanishing scale.
  double T_scale = 1.0;
  bool flat = false;
  if (!steady && opts_.stabilize) {
    const Vec& T = *state.T_old;
    const double mean = T.mean();
    T_scale = (T.array() - mean).abs().maxCoeff();
    flat = T_scale <= 1e-14 * std::max(1.0, std::abs(mean));
    if (flat) T_scale = 1.0;
  }

  const QuadratureRule rule = quadrature_rule(opts_.quad_degree);
  const ShapeTable tt = tabulate(ElementType::q2, rule);
  const HessTable hh = tabulate_hessian(ElementType::q2, rule);
  const int nq = rule.size();
  const int nd = tt.n_dofs;
  const double third = 1.0 / 3.0;
  const double top_y = mesh_.extent().y1;
  const double t_old = time - (steady ? 0.0 : state.dt);

  struct Local {
    MatX K;
    Vec rhs;
    double nu = 0.0;
  };

  nu_.assign(nc, 0.0);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(nc) * nd * nd);
  rhs_ = Vec::Zero(n);

  par::assemble_cells<Local>(
      nc,
      [&](std::size_t ci, Local& L) {
        const int c = static_cast<int>(ci);
        L.K = MatX::Zero(nd, nd);
        L.rhs = Vec::Zero(nd);

        const Mesh::CellGeom geom = mesh_.cell_geom(c);
        const double J = geom.hx * geom.hy;
        const double ihx2 = 1.0 / (geom.hx * geom.hx);
        const double ihy2 = 1.0 / (geom.hy * geom.hy);

        Vec cT, cTm;
        Vec Tn, Tnx, Tny, Tnm, Tmx, Tmy;
        if (!steady) {
          cT = cell_coeffs(space_, *state.T_old, c);
          Tn.resize(nq);
          Tnx.resize(nq);
          Tny.resize(nq);
          eval_on_cell(tt, geom, cT, &Tn, &Tnx, &Tny);
          if (bdf2) {
            cTm = cell_coeffs(space_, *state.T_older, c);
            Tnm.resize(nq);
            if (expl) {
              Tmx.resize(nq);
              Tmy.resize(nq);
              eval_on_cell(tt, geom, cTm, &Tnm, &Tmx, &Tmy);
            } else {
              eval_on_cell(tt, geom, cTm, &Tnm, nullptr, nullptr);
            }
          }
        }
        Vec ux, uy, uxx, uxy, uyx, uyy;
        if (has_u) {
          const Vec cux = cell_coeffs(space_, *velocity, c, 2, 0);
          const Vec cuy = cell_coeffs(space_, *velocity, c, 2, 1);
          ux.resize(nq);
          uy.resize(nq);
          if (opts_.heating.shear) {
            uxx.resize(nq);
            uxy.resize(nq);
            uyx.resize(nq);
            uyy.resize(nq);
            eval_on_cell(tt, geom, cux, &ux, &uxx, &uxy);
            eval_on_cell(tt, geom, cuy, &uy, &uyx, &uyy);
          } else {
            eval_on_cell(tt, geom, cux, &ux, nullptr, nullptr);
            eval_on_cell(tt, geom, cuy, &uy, nullptr, nullptr);
          }
        }

        thread_local std::vector<MaterialOutputs> outs;
        outs.assign(nq, MaterialOutputs{});
        thread_local std::vector<Pt> xs;
        xs.assign(nq, Pt{});
        thread_local std::vector<double> depth;
        depth.assign(nq, 0.0);
        for (int q = 0; q < nq; ++q) {
          const Pt x = geom.map(rule.points[q].x, rule.points[q].y);
          xs[q] = x;
          depth[q] = top_y - x.y;
          MaterialInputs in;
          in.position = x;
          in.depth = depth[q];
          in.temperature = steady ? 0.0 : Tn[q];
          in.pressure = material_.reference_pressure(in.depth);
          material_.evaluate(in, outs[q]);
        }
        average_cell(opts_.averaging, rule, outs);

        // Per-point coefficients: density convention, effective capacity,
        // the implicit adiabatic/latent reaction coefficient, and the fixed
        // heat sources.
        thread_local std::vector<double> cp_eff, react, heat;
        cp_eff.assign(nq, 0.0);
        react.assign(nq, 0.0);
        heat.assign(nq, 0.0);
        for (int q = 0; q < nq; ++q) {
          const MaterialOutputs& m = outs[q];
          const double rho =
              anelastic ? material_.reference_density(depth[q]) : m.rho;
          const double T_star = steady ? 0.0 : Tn[q];
          cp_eff[q] = effective_heat_capacity(rho * m.cp, rho, T_star, m.dS_dT);
          if (opts_.heating.adiabatic && has_u) {
            // u . grad p with the hydrostatic substitution grad p = rho g.
            const Vec2 g = material_.gravity(xs[q]);
            const double u_gradp = rho * (ux[q] * g[0] + uy[q] * g[1]);
            react[q] = (m.alpha + rho * m.dS_dp) * u_gradp;
          }
          if (opts_.heating.internal) heat[q] += rho * m.H;
          if (opts_.heating.shear && has_u) {
            const double exx = uxx[q], eyy = uyy[q];
            const double exy = 0.5 * (uxy[q] + uyx[q]);
            const double div = exx + eyy;
            heat[q] += 2.0 * m.eta * (exx * exx + eyy * eyy +
                                      2.0 * exy * exy - third * div * div);
          }
          if (opts_.heating.source) heat[q] += opts_.heating.source(xs[q], time);
        }

        // Stabilization: first-order cap and strong-residual reduction,
        // evaluated on the previous solution at the previous time level,
        // with the cell-averaged conductivity treated as constant.
        if (opts_.stabilize && has_u && !steady && !flat) {
          double umax = 0.0, cp_max = 0.0, res_max = 0.0;
          for (int q = 0; q < nq; ++q) {
            umax = std::max(umax, std::hypot(ux[q], uy[q]));
            cp_max = std::max(cp_max, std::abs(cp_eff[q]));
            double lap = 0.0;
            for (int j = 0; j < nd; ++j)
              lap += cT[j] * (hh.hess_xi(q, j) * ihx2 + hh.hess_eta(q, j) * ihy2);
            const double dTdt = bdf2 ? (Tn[q] - Tnm[q]) / state.dt_old : 0.0;
            double res = cp_eff[q] * (dTdt + ux[q] * Tnx[q] + uy[q] * Tny[q]) -
                         outs[q].k * lap - react[q] * Tn[q] - heat[q];
            // heat[] carries the source at the new time; the residual wants
            // the previous one.
            if (opts_.heating.source)
              res += opts_.heating.source(xs[q], time) -
                     opts_.heating.source(xs[q], t_old);
            res_max = std::max(res_max, std::abs(res));
          }
          const double diam = std::hypot(geom.hx, geom.hy);
          L.nu = std::min(opts_.beta * diam * umax * cp_max,
                          opts_.c_e * diam * diam * res_max / T_scale);
        }

        thread_local std::vector<double> dNx, dNy;
        dNx.assign(nd, 0.0);
        dNy.assign(nd, 0.0);
        for (int q = 0; q < nq; ++q) {
          const double w2 = rule.weights[q] * J;
          const double k_eff = outs[q].k + L.nu;
          for (int i = 0; i < nd; ++i) {
            dNx[i] = tt.grad_xi(q, i) / geom.hx;
            dNy[i] = tt.grad_eta(q, i) / geom.hy;
          }
          double ax = 0.0, ay = 0.0;
          if (has_u) {
            ax = cp_eff[q] * ux[q];
            ay = cp_eff[q] * uy[q];
          }
          double f = heat[q];
          if (!steady)
            f -= cp_eff[q] * (a1 * Tn[q] + (bdf2 ? a2 * Tnm[q] : 0.0));
          if (has_u && expl) {
            // Semi-implicit variant: u . grad T* with the extrapolated
            // temperature T* = (1+r) T_n - r T_{n-1} on the rhs.
            const double gx = bdf2 ? (1.0 + r) * Tnx[q] - r * Tmx[q] : Tnx[q];
            const double gy = bdf2 ? (1.0 + r) * Tny[q] - r * Tmy[q] : Tny[q];
            f -= ax * gx + ay * gy;
          }
          for (int i = 0; i < nd; ++i) {
            const double Ni = w2 * tt.values(q, i);
            L.rhs(i) += Ni * f;
            for (int j = 0; j < nd; ++j) {
              double v = Ni * (cp_eff[q] * a0 - react[q]) * tt.values(q, j) +
                         w2 * k_eff * (dNx[i] * dNx[j] + dNy[i] * dNy[j]);
              if (has_u && !expl) v += Ni * (ax * dNx[j] + ay * dNy[j]);
              L.K(i, j) += v;
            }
          }
        }
      },
      [&](std::size_t ci, Local& L) {
        nu_[ci] = L.nu;
        const std::vector<int>& dofs = space_.cell_dofs(static_cast<int>(ci));
        cs_.scatter(L.K, L.rhs, dofs, trip, rhs_);
      });

  cs_.append_placeholder_rows(trip);
  K_.resize(n, n);
  K_.setFromTriplets(trip.begin(), trip.end());
  ilut_.setDroptol(1e-4);
  ilut_.setFillfactor(20);
  ilut_.compute(K_);
  require(ilut_.info() == Eigen::Success,
          "energy preconditioner factorization failed");
  assembled_ = true;
}

EnergyReport EnergySolver::solve(Vec& T) const {
  MC_ASSERT(assembled_, "assemble before solving");
  const int n = space_.n_dofs();
  if (T.size() != n) T = Vec::Zero(n);
  Vec x = T;
  cs_.set_zero(x);

  const LinOp op = [this](const Vec& v, Vec& y) { y.noalias() = K_ * v; };
  const LinOp pre = [this](const Vec& v, Vec& y) { y = ilut_.solve(v); };
  const IterStats st =
      fgmres(op, rhs_, x, pre, opts_.rtol, opts_.max_iter, opts_.restart);
  if (!st.converged)
    fail("energy solver stalled after " + std::to_string(st.iterations) +
         " iterations (residual " + std::to_string(st.residual) + ")");
  cs_.distribute(x);
  T = x;
  EnergyReport rep;
  rep.iterations = st.iterations;
  rep.residual = st.residual;
  rep.converged = true;
  return rep;
}

}  // namespace mconv
