#pragma once

// Stokes flow: assembly of the (compressible) saddle-point system in all
// supported formulations, the right-hand-side compatibility correction for
// the explicit mass strategy, pressure normalization, the block-
// preconditioned flexible GMRES solve, and the Picard loop that iterates
// the lagged-velocity nonlinearity.

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mconv/fieldops.hpp"
#include "mconv/linalg.hpp"
#include "mconv/material.hpp"
#include "mconv/space.hpp"

namespace mconv {

// Which density approximation the momentum/mass/energy equations use. The
// names follow the common shorthand: ba = Boussinesq, tala = truncated
// anelastic liquid, ala = anelastic liquid, full = density from the
// evolving total pressure and temperature everywhere.
enum class Approximation { ba, tala, ala, full };

// How the compressible mass equation div(rho u) = 0 enters the system:
//   incompressible -- plain div u = 0 (forced by ba);
//   implicit       -- div u + (drho_dp g + (1/rho*) drho_dT grad T*) . u = 0
//                     assembled into the lower-left block (nonsymmetric);
//   explicit       -- the same coupling term evaluated with the lagged
//                     velocity u* and moved to the right-hand side, keeping
//                     the matrix symmetric and identical for all density
//                     profiles.
enum class MassStrategy { incompressible, implicit_coupling, explicit_rhs };

// Source of the reference profiles entering the mass coupling: the model's
// adiabat rho_ref(z), or extrapolated previous solutions (rho*, T*), which
// adds the (1/rho*) drho_dT grad T* . u term.
enum class ReferenceProfile { adiabatic, extrapolated };

struct FormulationConfig {
  Approximation approximation = Approximation::ba;
  MassStrategy mass = MassStrategy::incompressible;
  ReferenceProfile reference = ReferenceProfile::adiabatic;

  // Checks the combination (ba forces incompressible) and normalizes it.
  void validate() const;
  bool needs_mass_coupling() const { return mass != MassStrategy::incompressible; }
};

Approximation parse_approximation(const std::string& name);
std::string approximation_name(Approximation a);
MassStrategy parse_mass_strategy(const std::string& name);
std::string mass_strategy_name(MassStrategy m);

// Velocity boundary condition of one side. free_slip constrains the normal
// component to zero, no_slip both components, prescribed sets both from the
// given functions, open leaves the side natural (zero total traction).
struct VelocityBC {
  enum class Kind { free_slip, no_slip, prescribed, open };
  Kind kind = Kind::free_slip;
  ScalarFn ux, uy;  // prescribed only
};

using StokesBCs = std::array<VelocityBC, 4>;  // indexed by Side

struct StokesOptions {
  FormulationConfig formulation;
  Averaging averaging = Averaging::none;
  ElementType pressure_element = ElementType::q1;
  int quad_degree = 5;
  VectorFn body_force;  // optional extra momentum source (manufactured cases)

  double rtol = 1e-6;        // outer FGMRES relative residual
  int max_outer = 1000;
  int restart = 50;
  InnerSolver::Kind inner_a = InnerSolver::Kind::ic0;
  double inner_a_rtol = 1e-2;
  int inner_a_maxit = 1000;
  double inner_s_rtol = 1e-4;  // Schur (pressure mass) inner CG, Jacobi
  int inner_s_maxit = 500;
};

struct SolverReport {
  int outer = 0;
  int inner_a = 0;
  int inner_s = 0;
  double residual = 0.0;
  bool converged = false;
  int picard = 0;  // nonlinear iterations when a Picard loop ran
};

// Assembled block system in the solve variable (u, p/s) where s is the
// pressure scale (geometric-mean viscosity): the stored matrix is
//   [ A     -s G  ]
//   [ -s(G^T + C)   0 ]
// with placeholder unit rows for constrained dofs. Velocity dofs come
// first (interleaved components), pressure dofs follow with offset n_u.
struct StokesSystem {
  SpMat K;        // full saddle matrix, constraints eliminated
  SpMat A;        // velocity block (copy of K's top-left), for the inner solve
  SpMat Bt;       // gradient block (top-right copy), for the preconditioner
  SpMat Mp;       // (1/eta)-weighted pressure mass, for the Schur solve
  Vec rhs_fixed;  // buoyancy + Dirichlet lift (explicit mass rhs not included)
  Vec rhs;        // rhs_fixed plus the current explicit mass rhs
  int n_u = 0, n_p = 0;
  double pressure_scale = 1.0;
  bool symmetric = false;          // no coupling block assembled
  bool all_normal_prescribed = false;
  double delta = 0.0;              // last applied compatibility shift
  double volume = 0.0;             // sum of the pressure mass vector
  double boundary_flux = 0.0;      // integral of prescribed u . n
  Vec p_mass;                      // pressure basis integrals, condensed
  Vec p_unit;                      // constant-pressure pattern on free dofs
};

// Driver-facing Stokes solver bound to one mesh + material + options set.
// Usage per time step: assemble(...) once, then update_mass_rhs(...) +
// solve(...) once (implicit/incompressible) or inside picard() (explicit).
class StokesSolver {
 public:
  StokesSolver(const Mesh& mesh, const MaterialModel& material, StokesOptions opts,
               StokesBCs bcs);

  const FunctionSpace& velocity_space() const { return vel_space_; }
  const FunctionSpace& pressure_space() const { return p_space_; }
  const StokesOptions& options() const { return opts_; }
  const StokesSystem& system() const { return sys_; }
  const ConstraintSet& velocity_constraints() const { return vel_cs_; }
  const ConstraintSet& pressure_constraints() const { return p_cs_; }

  // Builds matrix and fixed rhs. T_star: coefficients on T_space (same
  // mesh), used for buoyancy, viscosity, and the coupling coefficients;
  // p_lagged: dynamic pressure of the previous step on the pressure space
  // (ala/full only, may be null for a zero initial pressure).
  void assemble(const FunctionSpace& T_space, const Vec& T_star, const Vec* p_lagged);

  // Explicit strategy: recompute the mass rhs from the lagged velocity
  // (null = zero, the first Picard iterate) and apply the compatibility
  // shift when the whole boundary has prescribed normal velocity. No-op
  // for the other strategies.
  void update_mass_rhs(const Vec* u_star);

  // Solves the current system; u/p are warm starts when sized and receive
  // the constrained-distributed solution. p is normalized to zero mean
  // when the pressure is only determined up to a constant.
  SolverReport solve(Vec& u, Vec& p);

  // Explicit-strategy fixed point: repeat update_mass_rhs(u)/solve until
  // the mass rhs stops changing (relative inf-norm below tol). For other
  // strategies this is just one solve.
  SolverReport picard(Vec& u, Vec& p, double tol = 1e-6, int max_iter = 30);

 private:
  const Mesh& mesh_;
  const MaterialModel& material_;
  StokesOptions opts_;
  StokesBCs bcs_;
  FunctionSpace vel_space_;  // scalar q2 layout; velocity interleaves 2 comps
  FunctionSpace p_space_;
  ConstraintSet vel_cs_;     // interleaved vector constraints incl. Dirichlet
  ConstraintSet p_cs_;       // pressure hanging constraints
  ConstraintSet block_cs_;   // both, pressure offset by n_u
  StokesSystem sys_;
  InnerSolver inner_a_, inner_s_;
  Vec p_mass_raw_;           // uncondensed pressure basis integrals
  double compress_integral_ = 0.0;  // last integral of the coupling . u*
  bool assembled_ = false;

  // Coupling vector (averaged drho-slopes dotted with gravity and the
  // reference-gradient term) cached at every quadrature point of every
  // cell by assemble(), so the explicit mass rhs reuses exactly the
  // averaged coefficients that built the matrix.
  std::vector<double> gamma_x_, gamma_y_;

  void build_constraints();
  void compute_boundary_flux();
  void apply_preconditioner(const Vec& x, Vec& y, SolverReport& report);
};

// delta = -(flux + coupling integral)/volume; the shift that restores
// solvability of the mass row under fully prescribed normal velocity.
double compute_delta(double boundary_flux, double compress_integral, double volume);

// Subtracts the mean so that the integral of p over the mesh vanishes;
// idempotent. Works on both pressure spaces.
void normalize_pressure(const FunctionSpace& p_space, Vec& p);

}  // namespace mconv
