#include "mconv/stokes.hpp"

#include <algorithm>
#include <cmath>

#include "mconv/parallel.hpp"

namespace mconv {

// ---------------------------------------------------------------------------
// Formulation plumbing

void FormulationConfig::validate() const {
  if (approximation == Approximation::ba && mass != MassStrategy::incompressible)
    fail("the Boussinesq approximation admits only the incompressible mass equation");
}

Approximation parse_approximation(const std::string& name) {
  if (name == "ba") return Approximation::ba;
  if (name == "tala") return Approximation::tala;
  if (name == "ala") return Approximation::ala;
  if (name == "full") return Approximation::full;
  fail("unknown approximation '" + name + "' (expected ba, tala, ala, full)");
}

std::string approximation_name(Approximation a) {
  switch (a) {
    case Approximation::ba: return "ba";
    case Approximation::tala: return "tala";
    case Approximation::ala: return "ala";
    case Approximation::full: return "full";
  }
  return "?";
}

MassStrategy parse_mass_strategy(const std::string& name) {
  if (name == "incompressible") return MassStrategy::incompressible;
  if (name == "implicit") return MassStrategy::implicit_coupling;
  if (name == "explicit") return MassStrategy::explicit_rhs;
  fail("unknown mass strategy '" + name + "' (expected incompressible, implicit, explicit)");
}

std::string mass_strategy_name(MassStrategy m) {
  switch (m) {
    case MassStrategy::incompressible: return "incompressible";
    case MassStrategy::implicit_coupling: return "implicit";
    case MassStrategy::explicit_rhs: return "explicit";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Helpers

namespace {

// Applies the transpose of the constraint elimination to a raw assembled
// vector: constrained-row mass moves to the masters (weights sum to one),
// constrained entries end up zero. Totals are preserved exactly, which the
// compatibility correction relies on.
Vec condense_vector(const ConstraintSet& cs, const Vec& raw) {
  Vec out = raw;
  for (const auto& line : cs.lines()) {
    const double v = out[line.dof];
    out[line.dof] = 0.0;
    for (const auto& [master, w] : line.entries) out[master] += w * v;
  }
  return out;
}

// Which velocity component a slip wall pins: x on vertical sides, y on
// horizontal ones.
int normal_component(Side side) {
  return (side == Side::left || side == Side::right) ? 0 : 1;
}

}  // namespace

double compute_delta(double boundary_flux, double compress_integral, double volume) {
  MC_ASSERT(volume > 0.0, "compatibility shift needs a positive domain volume");
  return -(boundary_flux + compress_integral) / volume;
}

void normalize_pressure(const FunctionSpace& p_space, Vec& p) {
  require(p.size() == p_space.n_dofs(), "pressure vector does not match its space");
  const double mean = integrate(p_space, p, 3) / p_space.mesh().domain_area();
  if (p_space.element() == ElementType::p1disc) {
    for (int j = 0; j < p.size(); j += 3) p[j] -= mean;
  } else {
    p.array() -= mean;
  }
}

// ---------------------------------------------------------------------------
// StokesSolver

StokesSolver::StokesSolver(const Mesh& mesh, const MaterialModel& material,
                           StokesOptions opts, StokesBCs bcs)
    : mesh_(mesh),
      material_(material),
      opts_(opts),
      bcs_(std::move(bcs)),
      vel_space_(mesh, ElementType::q2),
      p_space_(mesh, opts.pressure_element) {
  opts_.formulation.validate();
  require(opts_.pressure_element != ElementType::q2,
          "pressure space must be q1 or p1disc (one degree below the velocity)");
  for (const VelocityBC& bc : bcs_)
    if (bc.kind == VelocityBC::Kind::prescribed)
      require(bc.ux && bc.uy, "prescribed velocity side needs both component functions");
  build_constraints();
  compute_boundary_flux();
}

void StokesSolver::build_constraints() {
  const int ns = vel_space_.n_dofs();
  sys_.n_u = 2 * ns;
  sys_.n_p = p_space_.n_dofs();

  // Hanging-node relations act per component on the interleaved layout.
  const ConstraintSet& hang = vel_space_.hanging_constraints();
  for (int comp = 0; comp < 2; ++comp)
    hang.append_mapped(vel_cs_, [comp](int d) { return 2 * d + comp; });

  // Boundary values; later sides win where a corner dof is shared.
  bool all_normal = true;
  for (int si = 0; si < 4; ++si) {
    const Side side = static_cast<Side>(si);
    const VelocityBC& bc = bcs_[si];
    if (bc.kind == VelocityBC::Kind::open) {
      all_normal = false;
      continue;
    }
    for (int d : vel_space_.boundary_dofs(side)) {
      const Pt x = vel_space_.dof_point(d);
      switch (bc.kind) {
        case VelocityBC::Kind::free_slip:
          vel_cs_.add_line(2 * d + normal_component(side));
          break;
        case VelocityBC::Kind::no_slip:
          vel_cs_.add_line(2 * d);
          vel_cs_.add_line(2 * d + 1);
          break;
        case VelocityBC::Kind::prescribed:
          vel_cs_.add_line(2 * d);
          vel_cs_.set_inhomogeneity(2 * d, bc.ux(x));
          vel_cs_.add_line(2 * d + 1);
          vel_cs_.set_inhomogeneity(2 * d + 1, bc.uy(x));
          break;
        case VelocityBC::Kind::open:
          break;
      }
    }
  }
  vel_cs_.close(sys_.n_u);
  sys_.all_normal_prescribed = all_normal;

  p_space_.hanging_constraints().append_mapped(p_cs_, [](int d) { return d; });
  p_cs_.close(sys_.n_p);

  const int nu = sys_.n_u;
  vel_cs_.append_mapped(block_cs_, [](int d) { return d; });
  p_cs_.append_mapped(block_cs_, [nu](int d) { return nu + d; });
  block_cs_.close(nu + sys_.n_p);
}

void StokesSolver::compute_boundary_flux() {
  // Integral of the prescribed normal velocity over the boundary; slip and
  // no-slip walls contribute nothing by construction.
  std::vector<double> gp, gw;
  gauss_legendre(3, gp, gw);
  double flux = 0.0;
  for (int c = 0; c < mesh_.n_active(); ++c) {
    for (int f = 0; f < 4; ++f) {
      const Side side = mesh_.boundary_side(c, f);
      if (side == Side::none) continue;
      const VelocityBC& bc = bcs_[static_cast<int>(side)];
      if (bc.kind != VelocityBC::Kind::prescribed) continue;
      const Mesh::CellGeom g = mesh_.cell_geom(c);
      for (std::size_t k = 0; k < gp.size(); ++k) {
        Pt x;
        double nx = 0, ny = 0, len = 0;
        switch (f) {
          case 0: x = {g.x0, g.y0 + gp[k] * g.hy}; nx = -1; len = g.hy; break;
          case 1: x = {g.x0 + g.hx, g.y0 + gp[k] * g.hy}; nx = 1; len = g.hy; break;
          case 2: x = {g.x0 + gp[k] * g.hx, g.y0}; ny = -1; len = g.hx; break;
          default: x = {g.x0 + gp[k] * g.hx, g.y0 + g.hy}; ny = 1; len = g.hx; break;
        }
        flux += gw[k] * len * (bc.ux(x) * nx + bc.uy(x) * ny);
      }
    }
  }
  sys_.boundary_flux = flux;
}

void StokesSolver::assemble(const FunctionSpace& T_space, const Vec& T_star,
                            const Vec* p_lagged) {
  const FormulationConfig& form = opts_.formulation;
  const bool has_T = T_star.size() > 0;
  if (has_T)
    require(T_star.size() == T_space.n_dofs() && &T_space.mesh() == &mesh_,
            "temperature field does not match the flow mesh");
  if (form.reference == ReferenceProfile::extrapolated && !has_T)
    fail("the extrapolated reference profile needs a temperature field");
  const bool use_plag = p_lagged != nullptr &&
                        (form.approximation == Approximation::ala ||
                         form.approximation == Approximation::full);
  if (use_plag)
    require(p_lagged->size() == sys_.n_p, "lagged pressure does not match its space");
  const bool coupling = form.needs_mass_coupling();
  const bool implicit = form.mass == MassStrategy::implicit_coupling;

  const QuadratureRule rule = quadrature_rule(opts_.quad_degree);
  const ShapeTable vt = tabulate(ElementType::q2, rule);
  const ShapeTable pt = tabulate(opts_.pressure_element, rule);
  const ShapeTable tt = tabulate(T_space.element(), rule);
  const int nq = rule.size();
  const int nv = vt.n_dofs;          // scalar velocity dofs per cell
  const int npl = pt.n_dofs;         // pressure dofs per cell
  const int nloc = 2 * nv + npl;
  const int nc = mesh_.n_active();
  const int nu = sys_.n_u, np = sys_.n_p;
  const double third = 1.0 / 3.0;
  const double top_y = mesh_.extent().y1;

  gamma_x_.assign(static_cast<std::size_t>(nc) * nq, 0.0);
  gamma_y_.assign(static_cast<std::size_t>(nc) * nq, 0.0);

  struct Local {
    MatX K;
    MatX Mp;
    Vec rhs;
    Vec pmass;
    double log_eta = 0.0;
  };
  std::vector<Local> locals(nc);

  // Phase 1 (parallel): pure per-cell kernels.
  par::for_each_cell(nc, [&](std::size_t ci) {
    const int c = static_cast<int>(ci);
    Local& L = locals[ci];
    L.K = MatX::Zero(nloc, nloc);
    L.Mp = MatX::Zero(npl, npl);
    L.rhs = Vec::Zero(nloc);
    L.pmass = Vec::Zero(npl);

    const Mesh::CellGeom geom = mesh_.cell_geom(c);
    const double J = geom.hx * geom.hy;

    Vec Tval, Tgx, Tgy, plag;
    if (has_T) {
      const Vec tc = cell_coeffs(T_space, T_star, c);
      Tval.resize(nq);
      Tgx.resize(nq);
      Tgy.resize(nq);
      eval_on_cell(tt, geom, tc, &Tval, &Tgx, &Tgy);
    }
    if (use_plag) {
      const Vec pc = cell_coeffs(p_space_, *p_lagged, c);
      plag.resize(nq);
      eval_on_cell(pt, geom, pc, &plag, nullptr, nullptr);
    }

    // Material state at every quadrature point, then the per-cell average.
    thread_local std::vector<MaterialOutputs> outs;
    outs.assign(nq, MaterialOutputs{});
    thread_local std::vector<Pt> xs;
    xs.assign(nq, Pt{});
    for (int q = 0; q < nq; ++q) {
      const Pt x = geom.map(rule.points[q].x, rule.points[q].y);
      xs[q] = x;
      MaterialInputs in;
      in.position = x;
      in.depth = top_y - x.y;
      in.temperature = has_T ? Tval[q] : 0.0;
      in.pressure = material_.reference_pressure(in.depth) + (use_plag ? plag[q] : 0.0);
      material_.evaluate(in, outs[q]);
    }
    average_cell(opts_.averaging, rule, outs);

    std::vector<double> dNx(nv), dNy(nv);
    for (int q = 0; q < nq; ++q) {
      const double w2 = rule.weights[q] * J;
      const double eta = outs[q].eta;
      MC_ASSERT(eta > 0.0, "viscosity must stay positive");
      L.log_eta += std::log(eta);
      const double e2 = 2.0 * eta * w2;
      for (int i = 0; i < nv; ++i) {
        dNx[i] = vt.grad_xi(q, i) / geom.hx;
        dNy[i] = vt.grad_eta(q, i) / geom.hy;
      }

      // Deviatoric stress block: 2 eta (eps(u) - 1/3 (div u) I) : eps(v).
      for (int i = 0; i < nv; ++i) {
        for (int j = 0; j < nv; ++j) {
          const double xx = e2 * ((1.0 - third) * dNx[i] * dNx[j] + 0.5 * dNy[i] * dNy[j]);
          const double xy = e2 * (0.5 * dNy[i] * dNx[j] - third * dNx[i] * dNy[j]);
          const double yx = e2 * (0.5 * dNx[i] * dNy[j] - third * dNy[i] * dNx[j]);
          const double yy = e2 * ((1.0 - third) * dNy[i] * dNy[j] + 0.5 * dNx[i] * dNx[j]);
          L.K(2 * i, 2 * j) += xx;
          L.K(2 * i, 2 * j + 1) += xy;
          L.K(2 * i + 1, 2 * j) += yx;
          L.K(2 * i + 1, 2 * j + 1) += yy;
        }
      }

      // Gravity, buoyancy, and the mass-coupling vector at this point.
      const Vec2 grav = material_.gravity(xs[q]);
      const double drho = outs[q].rho - material_.reference_density(top_y - xs[q].y);
      double gx = 0.0, gy = 0.0;
      if (coupling) {
        gx = outs[q].drho_dp * grav[0];
        gy = outs[q].drho_dp * grav[1];
        if (form.reference == ReferenceProfile::extrapolated) {
          MC_ASSERT(outs[q].rho > 0.0, "extrapolated reference needs a positive density");
          gx += outs[q].drho_dT * Tgx[q] / outs[q].rho;
          gy += outs[q].drho_dT * Tgy[q] / outs[q].rho;
        }
        gamma_x_[ci * nq + q] = gx;
        gamma_y_[ci * nq + q] = gy;
      }

      Vec2 body = Vec2::Zero();
      if (opts_.body_force) body = opts_.body_force(xs[q]);
      for (int i = 0; i < nv; ++i) {
        const double f = w2 * vt.values(q, i);
        L.rhs(2 * i) += f * (drho * grav[0] + body[0]);
        L.rhs(2 * i + 1) += f * (drho * grav[1] + body[1]);
      }

      // Pressure coupling: gradient block, divergence row, optional
      // implicit compressibility row, Schur mass, and basis integrals.
      for (int j = 0; j < npl; ++j) {
        const double qv = pt.values(q, j);
        const double wq = w2 * qv;
        for (int i = 0; i < nv; ++i) {
          const double gvx = wq * dNx[i];
          const double gvy = wq * dNy[i];
          L.K(2 * i, 2 * nv + j) -= gvx;
          L.K(2 * i + 1, 2 * nv + j) -= gvy;
          L.K(2 * nv + j, 2 * i) -= gvx;
          L.K(2 * nv + j, 2 * i + 1) -= gvy;
          if (implicit) {
            const double Nv = vt.values(q, i);
            L.K(2 * nv + j, 2 * i) -= wq * gx * Nv;
            L.K(2 * nv + j, 2 * i + 1) -= wq * gy * Nv;
          }
        }
        for (int i = 0; i < npl; ++i) L.Mp(i, j) += wq * pt.values(q, i) / eta;
        L.pmass(j) += wq;
      }
    }
  });

  // Pressure scale: geometric mean of the (averaged) viscosity field.
  double log_sum = 0.0;
  for (const Local& L : locals) log_sum += L.log_eta;
  const double s = std::exp(log_sum / (static_cast<double>(nc) * nq));
  sys_.pressure_scale = s;

  // Phase 2 (serial, in cell order): constraint-eliminating scatter.
  std::vector<Eigen::Triplet<double>> tripK, tripMp;
  tripK.reserve(static_cast<std::size_t>(nc) * nloc * nloc);
  tripMp.reserve(static_cast<std::size_t>(nc) * npl * npl);
  sys_.rhs_fixed = Vec::Zero(nu + np);
  p_mass_raw_ = Vec::Zero(np);
  std::vector<int> dofs(nloc);
  for (int c = 0; c < nc; ++c) {
    Local& L = locals[c];
    const std::vector<int>& sc = vel_space_.cell_dofs(c);
    const std::vector<int>& pc = p_space_.cell_dofs(c);
    for (int i = 0; i < nv; ++i) {
      dofs[2 * i] = 2 * sc[i];
      dofs[2 * i + 1] = 2 * sc[i] + 1;
    }
    for (int j = 0; j < npl; ++j) dofs[2 * nv + j] = nu + pc[j];
    L.K.block(0, 2 * nv, 2 * nv, npl) *= s;
    L.K.block(2 * nv, 0, npl, 2 * nv) *= s;
    block_cs_.scatter(L.K, L.rhs, dofs, tripK, sys_.rhs_fixed);
    p_cs_.scatter_matrix(L.Mp, pc, tripMp);
    for (int j = 0; j < npl; ++j) p_mass_raw_[pc[j]] += L.pmass(j);
  }
  block_cs_.append_placeholder_rows(tripK);
  p_cs_.append_placeholder_rows(tripMp);

  sys_.K.resize(nu + np, nu + np);
  sys_.K.setFromTriplets(tripK.begin(), tripK.end());
  tripK.clear();
  tripK.shrink_to_fit();
  sys_.Mp.resize(np, np);
  sys_.Mp.setFromTriplets(tripMp.begin(), tripMp.end());
  sys_.A = sys_.K.topLeftCorner(nu, nu);
  sys_.Bt = sys_.K.topRightCorner(nu, np);

  sys_.symmetric = !implicit;
  sys_.volume = p_mass_raw_.sum();
  sys_.p_mass = condense_vector(p_cs_, p_mass_raw_);
  sys_.p_unit = Vec::Zero(np);
  for (int j = 0; j < np; ++j) {
    if (p_cs_.is_constrained(j)) continue;
    if (opts_.pressure_element == ElementType::p1disc && j % 3 != 0) continue;
    sys_.p_unit[j] = 1.0;
  }
  sys_.rhs = sys_.rhs_fixed;
  sys_.delta = 0.0;
  compress_integral_ = 0.0;

  inner_a_.setup(sys_.A, opts_.inner_a);
  inner_s_.setup(sys_.Mp, InnerSolver::Kind::jacobi);
  assembled_ = true;
}

void StokesSolver::update_mass_rhs(const Vec* u_star) {
  require(assembled_, "assemble() must run before update_mass_rhs()");
  sys_.rhs = sys_.rhs_fixed;
  sys_.delta = 0.0;
  compress_integral_ = 0.0;
  if (opts_.formulation.mass != MassStrategy::explicit_rhs) return;
  if (u_star != nullptr)
    require(u_star->size() == sys_.n_u, "lagged velocity does not match its space");

  const QuadratureRule rule = quadrature_rule(opts_.quad_degree);
  const ShapeTable vt = tabulate(ElementType::q2, rule);
  const ShapeTable pt = tabulate(opts_.pressure_element, rule);
  const int nq = rule.size();
  const int npl = pt.n_dofs;
  const int nc = mesh_.n_active();

  Vec f_raw = Vec::Zero(sys_.n_p);
  Vec ux(nq), uy(nq);
  for (int c = 0; c < nc; ++c) {
    const Mesh::CellGeom geom = mesh_.cell_geom(c);
    const double J = geom.hx * geom.hy;
    if (u_star != nullptr) {
      eval_on_cell(vt, geom, cell_coeffs(vel_space_, *u_star, c, 2, 0), &ux, nullptr, nullptr);
      eval_on_cell(vt, geom, cell_coeffs(vel_space_, *u_star, c, 2, 1), &uy, nullptr, nullptr);
    } else {
      ux.setZero();
      uy.setZero();
    }
    const std::vector<int>& pc = p_space_.cell_dofs(c);
    for (int q = 0; q < nq; ++q) {
      const std::size_t k = static_cast<std::size_t>(c) * nq + q;
      const double val =
          rule.weights[q] * J * (gamma_x_[k] * ux[q] + gamma_y_[k] * uy[q]);
      if (val == 0.0) continue;
      for (int j = 0; j < npl; ++j) f_raw[pc[j]] += val * pt.values(q, j);
    }
  }

  compress_integral_ = f_raw.sum();
  if (sys_.all_normal_prescribed) {
    sys_.delta = compute_delta(sys_.boundary_flux, compress_integral_, sys_.volume);
    if (sys_.delta != 0.0) f_raw += sys_.delta * p_mass_raw_;
  }
  const Vec f_cond = condense_vector(p_cs_, f_raw);
  sys_.rhs.segment(sys_.n_u, sys_.n_p) += sys_.pressure_scale * f_cond;
}

void StokesSolver::apply_preconditioner(const Vec& x, Vec& y, SolverReport& report) {
  const int nu = sys_.n_u, np = sys_.n_p;
  const double s = sys_.pressure_scale;

  // Schur half: y_p = -(1/s^2) Mp^{-1} x_p, projected mean-free when the
  // pressure is defined only up to a constant.
  Vec yp(np);
  report.inner_s += inner_s_.apply(x.tail(np), yp, opts_.inner_s_rtol, opts_.inner_s_maxit);
  yp *= -1.0 / (s * s);
  if (sys_.all_normal_prescribed)
    yp -= (sys_.p_mass.dot(yp) / sys_.volume) * sys_.p_unit;

  // Velocity half: y_u = A^{-1} (x_u - Bt y_p), approximately.
  const Vec t = x.head(nu) - sys_.Bt * yp;
  Vec yu(nu);
  report.inner_a += inner_a_.apply(t, yu, opts_.inner_a_rtol, opts_.inner_a_maxit);

  y.resize(nu + np);
  y.head(nu) = yu;
  y.tail(np) = yp;
}

SolverReport StokesSolver::solve(Vec& u, Vec& p) {
  require(assembled_, "assemble() must run before solve()");
  const int nu = sys_.n_u, np = sys_.n_p;
  const double s = sys_.pressure_scale;

  Vec x = Vec::Zero(nu + np);
  if (u.size() == nu) {
    Vec uu = u;
    vel_cs_.set_zero(uu);
    x.head(nu) = uu;
  }
  if (p.size() == np) {
    Vec pp = p / s;
    p_cs_.set_zero(pp);
    x.tail(np) = pp;
  }

  SolverReport report;
  const LinOp op = [this](const Vec& in, Vec& out) { out.noalias() = sys_.K * in; };
  const LinOp pre = [this, &report](const Vec& in, Vec& out) {
    apply_preconditioner(in, out, report);
  };
  const IterStats stats =
      fgmres(op, sys_.rhs, x, pre, opts_.rtol, opts_.max_outer, opts_.restart);
  report.outer = stats.iterations;
  report.residual = stats.residual;
  report.converged = stats.converged;
  if (!stats.converged)
    fail("flow solve stalled: " + std::to_string(stats.iterations) +
         " outer iterations, residual " + std::to_string(stats.residual));

  u = x.head(nu);
  vel_cs_.distribute(u);
  p = x.tail(np);
  p_cs_.distribute(p);
  p *= s;
  if (sys_.all_normal_prescribed) normalize_pressure(p_space_, p);
  return report;
}

SolverReport StokesSolver::picard(Vec& u, Vec& p, double tol, int max_iter) {
  require(assembled_, "assemble() must run before picard()");
  if (opts_.formulation.mass != MassStrategy::explicit_rhs) {
    update_mass_rhs(nullptr);
    SolverReport r = solve(u, p);
    r.picard = 1;
    return r;
  }

  SolverReport total;
  Vec f_prev;
  double change = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    update_mass_rhs(u.size() == sys_.n_u ? &u : nullptr);
    const Vec f_cur = sys_.rhs.segment(sys_.n_u, sys_.n_p);
    if (it > 1) {
      change = (f_cur - f_prev).lpNorm<Eigen::Infinity>();
      const double scale = std::max(f_cur.lpNorm<Eigen::Infinity>(), 1e-300);
      if (change <= tol * scale) {
        total.converged = true;
        return total;
      }
    }
    f_prev = f_cur;
    const SolverReport r = solve(u, p);
    total.outer += r.outer;
    total.inner_a += r.inner_a;
    total.inner_s += r.inner_s;
    total.residual = r.residual;
    total.converged = r.converged;
    total.picard = it;
  }
  fail("lagged-velocity iteration did not converge after " + std::to_string(max_iter) +
       " rounds (last rhs change " + std::to_string(change) + ")");
}

}  // namespace mconv
