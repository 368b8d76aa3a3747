#pragma once

// Implicit temperature transport: variable-step BDF-2 in time (backward
// Euler on the first step), implicit advection, conductive diffusion with
// an artificial-viscosity stabilization, and the optional heating terms
// (internal, shear, adiabatic with latent-heat coefficients).
//
// The equation assembled is
//
//   (rho C_p - rho T* dS/dT) (dT/dt + u . grad T) - div((k + nu_h) grad T)
//     = rho H + tau(u):eps(u) + (alpha + rho dS/dp) T (u . grad p),
//
// with grad p replaced by the hydrostatic rho g (pressure gradients of the
// discrete solution converge too poorly to be usable pointwise). The
// adiabatic/latent release term is linear in T and is treated implicitly;
// the coefficient temperature T* is the previous time level. With zero
// entropy derivatives every latent contribution is an exact floating-point
// zero, so the assembly reduces bit-for-bit to the plain form.
//
// Under the anelastic approximations (TALA/ALA) the density entering the
// heat capacity, heating, and hydrostatic terms is the reference profile;
// otherwise it is the current (averaged) material density.

#include <array>
#include <functional>
#include <vector>

#include <Eigen/IterativeLinearSolvers>

#include "mconv/material.hpp"
#include "mconv/space.hpp"
#include "mconv/stokes.hpp"

namespace mconv {

// Fixed-temperature or insulating side.
struct ThermalBC {
  enum class Kind { fixed, no_flux };
  Kind kind = Kind::no_flux;
  ScalarFn value;  // required for fixed
};

using ThermalBCs = std::array<ThermalBC, 4>;  // indexed by Side

// Which right-hand-side heat sources are active.
struct HeatingTerms {
  bool internal = false;   // rho H
  bool shear = false;      // tau(u):eps(u)
  bool adiabatic = false;  // (alpha + rho dS/dp) T (u . grad p)
  // Extra manufactured source f(x, t), added verbatim to the rhs.
  std::function<double(Pt, double)> source;
};

struct EnergyOptions {
  FormulationConfig formulation;  // selects the density convention
  Averaging averaging = Averaging::none;
  HeatingTerms heating;
  int quad_degree = 5;

  // Stabilization nu_h = min(beta h |u| rhoCp, c_e h^2 |R| / T_scale) per
  // cell, added to the conductivity; beta defaults to 0.052/degree.
  bool stabilize = true;
  double beta = 0.026;
  double c_e = 1.0;

  // Assemble advection from the extrapolated temperature on the rhs instead
  // of implicitly (demonstrates the semi-implicit CFL regime).
  bool explicit_advection = false;

  double rtol = 1e-8;
  int max_iter = 400;
  int restart = 50;
};

// Time-level bookkeeping for one step from t_n to t_{n+1} = t_n + dt.
// step is the 1-based index of the step being taken: step 1 runs backward
// Euler, later steps require both history levels. dt <= 0 selects the
// steady form (no mass term), used for equilibrium problems.
struct BdfState {
  int step = 1;
  const Vec* T_old = nullptr;    // T at t_n
  const Vec* T_older = nullptr;  // T at t_{n-1} (step >= 2)
  double dt = 0.0;
  double dt_old = 0.0;
};

// Variable-step BDF-2 weights for (a0 T^{n+1} + a1 T^n + a2 T^{n-1})/dt
// with step ratio r = dt/dt_old; r = 0 gives backward Euler (1, -1, 0).
std::array<double, 3> bdf_weights(double r);

// (rho C_p) - rho T* dS/dT; equals rho C_p exactly when dS/dT = 0.
inline double effective_heat_capacity(double rho_cp, double rho, double T_star,
                                      double dS_dT) {
  return rho_cp - rho * T_star * dS_dT;
}

struct EnergyReport {
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

class EnergySolver {
 public:
  // Boundary conditions and constraints are fixed at construction; rebuild
  // the solver after mesh adaptation.
  EnergySolver(Mesh& mesh, const MaterialModel& material, EnergyOptions opts,
               ThermalBCs bcs);

  const FunctionSpace& space() const { return space_; }
  const ConstraintSet& constraints() const { return cs_; }
  const EnergyOptions& options() const { return opts_; }

  // Build the system for one step. velocity is an interleaved vector field
  // on the (scalar) temperature space, or nullptr for u = 0; time is
  // t_{n+1}, used for the manufactured source.
  void assemble(const BdfState& state, const Vec* velocity, double time);

  // Solve the assembled system into T (used as the warm start) with
  // ILU-preconditioned flexible GMRES. Fails on stagnation.
  EnergyReport solve(Vec& T) const;

  // Assembled operator, for cross-checks.
  const SpMat& matrix() const { return K_; }
  const Vec& rhs() const { return rhs_; }

  // Stabilization viscosity per active cell from the last assemble.
  const std::vector<double>& stabilization() const { return nu_; }

 private:
  Mesh& mesh_;
  const MaterialModel& material_;
  EnergyOptions opts_;
  ThermalBCs bcs_;
  FunctionSpace space_;
  ConstraintSet cs_;
  SpMat K_;
  Vec rhs_;
  std::vector<double> nu_;
  Eigen::IncompleteLUT<double> ilut_;
  bool assembled_ = false;
};

}  // namespace mconv
