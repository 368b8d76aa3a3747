#include "mconv/transport.hpp"

#include <cmath>
#include <utility>

#include "mconv/energy.hpp"
#include "mconv/linalg.hpp"
#include "mconv/parallel.hpp"

namespace mconv {

SymEigen2 sym_eigen(double a11, double a12, double a22) {
  SymEigen2 e;
  const double mean = 0.5 * (a11 + a22);
  const double disc = std::hypot(0.5 * (a11 - a22), a12);
  e.lambda1 = mean + disc;
  e.lambda2 = mean - disc;
  if (disc <= 1e-15 * (std::abs(mean) + 1.0)) {
    e.v1 = {1.0, 0.0};
    e.v2 = {0.0, 1.0};
    return e;
  }
  // Of the two analytic eigenvector expressions, keep the one further from
  // cancellation.
  const Vec2 c1{a12, e.lambda1 - a11};
  const Vec2 c2{e.lambda1 - a22, a12};
  e.v1 = (c1.squaredNorm() >= c2.squaredNorm() ? c1 : c2).normalized();
  e.v2 = {-e.v1[1], e.v1[0]};
  return e;
}

PolarDecomposition polar_decompose(const Mat2& F) {
  const double det = F.determinant();
  const double scale = F.squaredNorm();
  require(std::abs(det) > 1e-14 * std::max(scale, 1e-300),
          "deformation tensor is singular; cannot polar-decompose");
  require(det > 0.0, "deformation tensor has negative determinant");

  // Square root of the SPD matrix M = F F^T in closed form.
  const Mat2 M = F * F.transpose();
  const double s = std::sqrt(M.determinant());
  const double t = std::sqrt(M.trace() + 2.0 * s);
  PolarDecomposition pd;
  pd.stretch = (M + s * Mat2::Identity()) / t;
  pd.rotation = pd.stretch.inverse() * F;
  return pd;
}

NaturalStrain natural_strain(const Mat2& L) {
  require(std::abs(L(0, 1) - L(1, 0)) <=
              1e-10 * std::max(1.0, L.cwiseAbs().maxCoeff()),
          "stretch tensor must be symmetric");
  const SymEigen2 e = sym_eigen(L(0, 0), 0.5 * (L(0, 1) + L(1, 0)), L(1, 1));
  require(e.lambda2 > 0.0, "stretch tensor must be positive definite");
  NaturalStrain ns;
  ns.value = std::log(e.lambda1 / e.lambda2);
  ns.lambda1 = e.lambda1;
  ns.lambda2 = e.lambda2;
  ns.major = e.v1;
  ns.minor = e.v2;
  return ns;
}

Mat2 finite_strain_increment(const Mat2& G, const Mat2& F, double dt,
                             int substeps) {
  require(substeps >= 1, "finite-strain increment needs at least one stage");
  if (substeps == 1) return dt * (G * F);
  const double h = dt / substeps;
  Mat2 P = Mat2::Identity();
  for (int k = 0; k < substeps; ++k) P += h * (G * P);
  return (P - Mat2::Identity()) * F;
}

namespace {
const char* kStrainNames[4] = {"F_xx", "F_xy", "F_yx", "F_yy"};
}

CompositionTransport::CompositionTransport(Mesh& mesh,
                                           std::vector<std::string> names,
                                           bool finite_strain,
                                           TransportOptions opts)
    : mesh_(mesh),
      opts_(opts),
      space_(mesh, ElementType::q2),
      cs_(make_scalar_constraints(space_, {})),
      finite_strain_(finite_strain) {
  require(opts_.quad_degree >= 1, "transport quadrature degree must be >= 1");
  if (finite_strain_) {
    for (int k = 0; k < 4; ++k) {
      Field f;
      f.name = kStrainNames[k];
      const double ident = (k == 0 || k == 3) ? 1.0 : 0.0;
      f.value = Vec::Constant(space_.n_dofs(), ident);
      f.inflow = ident;  // entering material carries an undeformed state
      fields_.push_back(std::move(f));
    }
  }
  for (std::string& name : names) {
    require(index_of(name) < 0, "duplicate composition field: " + name);
    Field f;
    f.name = std::move(name);
    f.value = Vec::Zero(space_.n_dofs());
    fields_.push_back(std::move(f));
  }
  require(!fields_.empty(), "transport needs at least one field");
}

int CompositionTransport::index_of(const std::string& name) const {
  for (int i = 0; i < n_fields(); ++i)
    if (fields_[i].name == name) return i;
  return -1;
}

void CompositionTransport::set_field(int i, const ScalarFn& f) {
  fields_.at(i).value = interpolate(space_, f);
}

void CompositionTransport::set_source(int i, SourceIntegral src) {
  fields_.at(i).source = std::move(src);
}

Mat2 CompositionTransport::deformation_at(int dof) const {
  require(finite_strain_, "no deformation fields in this transport set");
  Mat2 F;
  F << fields_[0].value[dof], fields_[1].value[dof], fields_[2].value[dof],
      fields_[3].value[dof];
  return F;
}

void CompositionTransport::reset() {
  step_ = 0;
  dt_old_ = 0.0;
  for (Field& f : fields_) {
    f.old1.resize(0);
    f.old2.resize(0);
  }
}

std::vector<TransportReport> CompositionTransport::advance(const Vec* velocity,
                                                           double t_old,
                                                           double dt) {
  require(dt > 0.0, "transport step size must be positive");
  const int n = space_.n_dofs();
  if (velocity)
    require(velocity->size() == 2 * n,
            "velocity does not match the transport space");
  const bool bdf2 = step_ >= 1 && dt_old_ > 0.0;
  const double r = bdf2 ? dt / dt_old_ : 0.0;

  // Extrapolated deformation for the G F source, frozen before any field
  // updates so all four components come from the same time levels.
  std::vector<Vec> strain_star;
  if (finite_strain_ && velocity) {
    strain_star.reserve(4);
    for (int k = 0; k < 4; ++k)
      strain_star.push_back(bdf2 ? Vec((1.0 + r) * fields_[k].value -
                                       r * fields_[k].old1)
                                 : fields_[k].value);
  }

  std::vector<TransportReport> reports(fields_.size());
  for (std::size_t i = 0; i < fields_.size(); ++i)
    advance_field(fields_[i], velocity,
                  (finite_strain_ && velocity && i < 4) ? strain_star.data()
                                                        : nullptr,
                  t_old, dt, r, reports[i]);

  ++step_;
  dt_old_ = dt;
  return reports;
}

void CompositionTransport::advance_field(Field& f, const Vec* velocity,
                                         const Vec* strain_star, double t_old,
                                         double dt, double r,
                                         TransportReport& rep) {
  const int n = space_.n_dofs();
  const int nc = mesh_.n_active();
  const bool bdf2 = step_ >= 1 && dt_old_ > 0.0;
  const bool has_u = velocity != nullptr;
  const int strain_comp =
      strain_star ? static_cast<int>(&f - fields_.data()) : -1;

  const std::array<double, 3> w_bdf = bdf_weights(r);
  const double a0 = w_bdf[0] / dt;
  const double a1 = w_bdf[1] / dt;
  const double a2 = w_bdf[2] / dt;

  // Flat-field guard for the stabilization residual, as in the temperature
  // equation: a uniform field needs no artificial viscosity.
  double c_scale = 1.0;
  bool flat = true;
  if (opts_.stabilize) {
    const double mean = f.value.mean();
    c_scale = (f.value.array() - mean).abs().maxCoeff();
    flat = c_scale <= 1e-14 * std::max(1.0, std::abs(mean));
    if (flat) c_scale = 1.0;
  }

  const QuadratureRule rule = quadrature_rule(opts_.quad_degree);
  const ShapeTable tt = tabulate(ElementType::q2, rule);
  const int nq = rule.size();
  const int nd = tt.n_dofs;

  struct Local {
    MatX K;
    Vec rhs;
    double nu = 0.0;
    double src = 0.0;  // integral of the source rate over the cell
  };

  f.nu.assign(nc, 0.0);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(nc) * nd * nd);
  Vec rhs = Vec::Zero(n);
  double src_total = 0.0;

  par::assemble_cells<Local>(
      nc,
      [&](std::size_t ci, Local& L) {
        const int c = static_cast<int>(ci);
        L.K = MatX::Zero(nd, nd);
        L.rhs = Vec::Zero(nd);

        const Mesh::CellGeom geom = mesh_.cell_geom(c);
        const double J = geom.hx * geom.hy;

        const Vec cC = cell_coeffs(space_, f.value, c);
        Vec Cn(nq), Cnx(nq), Cny(nq), Cnm;
        eval_on_cell(tt, geom, cC, &Cn, &Cnx, &Cny);
        if (bdf2) {
          const Vec cCm = cell_coeffs(space_, f.old1, c);
          Cnm.resize(nq);
          eval_on_cell(tt, geom, cCm, &Cnm, nullptr, nullptr);
        }

        Vec ux, uy, uxx, uxy, uyx, uyy;
        if (has_u) {
          const Vec cux = cell_coeffs(space_, *velocity, c, 2, 0);
          const Vec cuy = cell_coeffs(space_, *velocity, c, 2, 1);
          ux.resize(nq);
          uy.resize(nq);
          if (strain_comp >= 0) {
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

        // Source integral per quadrature point, as a rate (divided by dt).
        thread_local std::vector<double> q_rate;
        q_rate.assign(nq, 0.0);
        if (strain_comp >= 0) {
          Vec fs[4];
          for (int k = 0; k < 4; ++k) {
            const Vec ck = cell_coeffs(space_, strain_star[k], c);
            fs[k].resize(nq);
            eval_on_cell(tt, geom, ck, &fs[k], nullptr, nullptr);
          }
          for (int q = 0; q < nq; ++q) {
            Mat2 G, Fs;
            G << uxx[q], uxy[q], uyx[q], uyy[q];
            Fs << fs[0][q], fs[1][q], fs[2][q], fs[3][q];
            const Mat2 inc =
                finite_strain_increment(G, Fs, dt, opts_.strain_substeps);
            q_rate[q] = inc(strain_comp / 2, strain_comp % 2) / dt;
          }
        } else if (f.source) {
          for (int q = 0; q < nq; ++q) {
            const Pt x = geom.map(rule.points[q].x, rule.points[q].y);
            q_rate[q] = f.source(x, t_old, dt) / dt;
          }
        }

        // Stabilization: first-order cap (unit heat capacity) and the
        // strong residual of the pure advection equation at the previous
        // level. The source rate is left out: only its integral is known,
        // and the cap already bounds the viscosity where sources act.
        if (opts_.stabilize && has_u && !flat) {
          double umax = 0.0, res_max = 0.0;
          for (int q = 0; q < nq; ++q) {
            umax = std::max(umax, std::hypot(ux[q], uy[q]));
            const double dCdt = bdf2 ? (Cn[q] - Cnm[q]) / dt_old_ : 0.0;
            const double res = dCdt + ux[q] * Cnx[q] + uy[q] * Cny[q];
            res_max = std::max(res_max, std::abs(res));
          }
          const double diam = std::hypot(geom.hx, geom.hy);
          L.nu = std::min(opts_.beta * diam * umax,
                          opts_.c_e * diam * diam * res_max / c_scale);
        }

        thread_local std::vector<double> dNx, dNy;
        dNx.assign(nd, 0.0);
        dNy.assign(nd, 0.0);
        for (int q = 0; q < nq; ++q) {
          const double w2 = rule.weights[q] * J;
          for (int i = 0; i < nd; ++i) {
            dNx[i] = tt.grad_xi(q, i) / geom.hx;
            dNy[i] = tt.grad_eta(q, i) / geom.hy;
          }
          const double fq =
              q_rate[q] - a1 * Cn[q] - (bdf2 ? a2 * Cnm[q] : 0.0);
          L.src += w2 * q_rate[q];
          for (int i = 0; i < nd; ++i) {
            const double Ni = w2 * tt.values(q, i);
            L.rhs(i) += Ni * fq;
            for (int j = 0; j < nd; ++j) {
              double v = Ni * a0 * tt.values(q, j) +
                         w2 * L.nu * (dNx[i] * dNx[j] + dNy[i] * dNy[j]);
              if (has_u)
                v += Ni * (ux[q] * dNx[j] + uy[q] * dNy[j]);
              L.K(i, j) += v;
            }
          }
        }

        // Weak inflow condition. The advection form above is not integrated
        // by parts, so boundary faces with entering flow need the upwind
        // term |u.n| (C - C_in): without it the discrete operator loses
        // coercivity on the inflow boundary and a growing layer forms
        // there. On closed boxes (u.n = 0) the term vanishes identically.
        if (has_u && opts_.fresh_inflow) {
          const Vec cux = cell_coeffs(space_, *velocity, c, 2, 0);
          const Vec cuy = cell_coeffs(space_, *velocity, c, 2, 1);
          thread_local std::vector<double> pts1, wts1, Nf;
          gauss_legendre((opts_.quad_degree + 2) / 2, pts1, wts1);
          Nf.assign(nd, 0.0);
          const double fnx[4] = {-1, 1, 0, 0}, fny[4] = {0, 0, -1, 1};
          for (int face = 0; face < 4; ++face) {
            if (mesh_.boundary_side(c, face) == Side::none) continue;
            const double len = (face < 2) ? geom.hy : geom.hx;
            for (std::size_t k = 0; k < pts1.size(); ++k) {
              const double t = pts1[k];
              const double xi = (face == 0) ? 0.0 : (face == 1) ? 1.0 : t;
              const double eta = (face == 2) ? 0.0 : (face == 3) ? 1.0 : t;
              fe::shape(ElementType::q2, xi, eta, Nf.data());
              double vx = 0.0, vy = 0.0;
              for (int j = 0; j < nd; ++j) {
                vx += cux[j] * Nf[j];
                vy += cuy[j] * Nf[j];
              }
              const double un = vx * fnx[face] + vy * fny[face];
              if (un >= 0.0) continue;  // outflow or tangential: do nothing
              const double w1 = -un * wts1[k] * len;
              for (int i = 0; i < nd; ++i) {
                L.rhs(i) += w1 * Nf[i] * f.inflow;
                for (int j = 0; j < nd; ++j) L.K(i, j) += w1 * Nf[i] * Nf[j];
              }
            }
          }
        }
      },
      [&](std::size_t ci, Local& L) {
        f.nu[ci] = L.nu;
        const std::vector<int>& dofs = space_.cell_dofs(static_cast<int>(ci));
        cs_.scatter(L.K, L.rhs, dofs, trip, rhs);
        src_total += L.src;
      });

  cs_.append_placeholder_rows(trip);
  SpMat K(n, n);
  K.setFromTriplets(trip.begin(), trip.end());
  Eigen::IncompleteLUT<double> ilut;
  ilut.setDroptol(1e-4);
  ilut.setFillfactor(20);
  ilut.compute(K);
  require(ilut.info() == Eigen::Success,
          "transport preconditioner factorization failed");

  const double mass_old = integrate(space_, f.value, opts_.quad_degree);
  const double mass_older =
      bdf2 ? integrate(space_, f.old1, opts_.quad_degree) : 0.0;

  Vec x = f.value;
  cs_.set_zero(x);
  const LinOp op = [&](const Vec& v, Vec& y) { y.noalias() = K * v; };
  const LinOp pre = [&](const Vec& v, Vec& y) { y = ilut.solve(v); };
  const IterStats st =
      fgmres(op, rhs, x, pre, opts_.rtol, opts_.max_iter, opts_.restart);
  if (!st.converged)
    fail("transport solve stalled for " + f.name + ": residual " +
         std::to_string(st.residual) + " after " +
         std::to_string(st.iterations) + " iterations");
  cs_.distribute(x);

  rep.iterations = st.iterations;
  rep.residual = st.residual;
  rep.converged = st.converged;
  rep.mass = integrate(space_, x, opts_.quad_degree);
  // Row-summing the discrete balance: what the mass should be if advection
  // and stabilization were exactly conservative.
  const double predicted = (src_total - a1 * mass_old - a2 * mass_older) / a0;
  rep.mass_error = rep.mass - predicted;

  f.old2 = std::move(f.old1);
  f.old1 = std::move(f.value);
  f.value = std::move(x);
}

}  // namespace mconv
