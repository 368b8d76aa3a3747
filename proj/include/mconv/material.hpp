#pragma once

// Material models: pointwise coefficient evaluation for the flow and energy
// equations, reference (hydrostatic/adiabatic) profiles, phase-transition
// helpers, and the per-cell averaging schemes applied between evaluation and
// assembly.

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "mconv/config.hpp"
#include "mconv/element.hpp"
#include "mconv/types.hpp"

namespace mconv {

// Evaluation point state. `depth` is measured from the top surface downward
// (the driver computes it from the mesh extent); `pressure` is the total
// pressure the calling formulation chooses to expose to the model: reference
// pressure only, or reference plus the lagged dynamic part.
struct MaterialInputs {
  Pt position;
  double depth = 0.0;
  double temperature = 0.0;
  double pressure = 0.0;
  Mat2 strain_rate = Mat2::Zero();
  const double* composition = nullptr;
  int n_composition = 0;
};

// Coefficient bundle at one quadrature point. `rho` is the full density
// response at the given inputs; buoyancy subtracts the model's reference
// profile, and the anelastic mass/energy equations evaluate at reference
// conditions instead. Entropy derivatives follow the convention that the
// phase fraction X increases downward, which makes the effective heat
// capacity rho*cp - rho*T*dS_dT >= rho*cp near a transition and the release
// term (alpha + rho*dS_dp)*T*(u . grad p) positive for material descending
// through an exothermic boundary.
struct MaterialOutputs {
  double eta = 1.0;      // dynamic viscosity
  double rho = 1.0;      // density at the given (p, T, x)
  double cp = 1.0;       // specific heat capacity
  double k = 1.0;        // thermal conductivity
  double alpha = 0.0;    // thermal expansivity
  double drho_dp = 0.0;  // compressibility (density slope along pressure)
  double drho_dT = 0.0;
  double dS_dT = 0.0;    // phase-change entropy derivatives
  double dS_dp = 0.0;
  double H = 0.0;        // internal heating rate per unit mass
};

class MaterialModel {
 public:
  virtual ~MaterialModel() = default;

  virtual void evaluate(const MaterialInputs& in, MaterialOutputs& out) const = 0;

  // Reference state as a function of depth. Defaults describe an inert
  // background: zero reference density means the full density acts as
  // buoyancy. reference_pressure integrates rho_ref * g numerically from the
  // surface; models with closed forms override it.
  virtual double reference_density(double depth) const;
  virtual double reference_temperature(double depth) const;
  virtual double reference_pressure(double depth) const;

  // Benchmark-defined gravity (y points up, so gravity is (0, -g)).
  virtual Vec2 gravity(Pt position) const;
  double gravity_magnitude() const { return gravity({0, 0}).norm(); }

  virtual int n_compositions() const { return 0; }
};

// ---------------------------------------------------------------------------
// Phase transitions

// Descriptor of one smoothed univariant transition. The phase fraction is
//   X(z, T) = 1/2 (1 + tanh((z - z_tr(T)) / width)),
// increasing from 0 above to 1 below, with the transition depth shifted by
// the Clapeyron slope: z_tr(T) = depth + clapeyron * (T - reference_T) /
// rho_g. `rho_g` converts between pressure and depth near the transition.
// The entropy jump is delta_S if set (>= 0 for an exothermic transition
// crossed downward); otherwise it derives from the Clapeyron relation as
// clapeyron * delta_rho / rho^2.
struct PhaseTransition {
  double depth = 0.0;
  double width = 0.02;
  double clapeyron = 0.0;
  double delta_rho = 0.0;
  double delta_S = std::numeric_limits<double>::quiet_NaN();
  double reference_T = 0.0;
  double rho_g = 1.0;

  double entropy_jump(double rho) const {
    return std::isnan(delta_S) ? clapeyron * delta_rho / (rho * rho) : delta_S;
  }
};

struct PhaseSample {
  double X = 0.0;
  double dX_dT = 0.0;
  double dX_dz = 0.0;  // derivative along depth
  double dX_dp() const { return dX_dz_over_rho_g; }
  double dX_dz_over_rho_g = 0.0;
};

PhaseSample phase_function(double depth, double temperature, const PhaseTransition& tr);

// Clapeyron-relation entropy derivatives from phase-fraction derivatives:
// dS/dT = gamma (delta_rho / rho^2) dX/dT and likewise for dS/dp.
void entropy_derivatives(double dX_dT, double dX_dp, double gamma, double delta_rho,
                         double rho, double& dS_dT, double& dS_dp);

// ---------------------------------------------------------------------------
// Averaging

// Per-cell replacement of quadrature-point values before assembly. All
// MaterialOutputs fields are treated uniformly. The projection schemes fit a
// bilinear surrogate to the quadrature values by least squares and re-read
// it at the quadrature points; the limited variant additionally clamps to
// the raw min/max.
enum class Averaging {
  none,
  arithmetic,
  harmonic,
  geometric,
  max,
  project_q1,
  project_q1_limited,
};

Averaging parse_averaging(const std::string& name);
std::string averaging_name(Averaging a);

// Averages a single field given at quadrature points, in place. Harmonic and
// geometric means require sign-uniform data: all-positive uses the textbook
// formula, all-zero stays zero, all-negative mirrors the positive formula,
// and mixed signs are an error (the mean would be meaningless).
void average_values(Averaging scheme, const QuadratureRule& rule, std::vector<double>& v);

// Applies the scheme to every field of the per-point outputs of one cell.
void average_cell(Averaging scheme, const QuadratureRule& rule,
                  std::vector<MaterialOutputs>& outputs);

// ---------------------------------------------------------------------------
// Built-in models

// Constant-coefficient model; every field straight from the config section
// [material], with an optional constant reference_density for buoyancy
// subtraction.
class ConstantMaterial : public MaterialModel {
 public:
  explicit ConstantMaterial(const Config& cfg);
  ConstantMaterial() = default;

  void evaluate(const MaterialInputs& in, MaterialOutputs& out) const override;
  double reference_density(double depth) const override;
  Vec2 gravity(Pt) const override { return {0.0, -g_}; }

  MaterialOutputs values;
  double reference_rho = 0.0;  // subtracted from rho in the buoyancy term

 private:
  double g_ = 1.0;
};

// Nondimensional bottom-heated convection box with an exponential reference
// state: rho_ref = exp(z Di / gamma), T_ref = T_top exp(z Di), eta = Di/Ra,
// alpha = Di, all other constants 1. The density responds linearly around
// the reference: rho = rho_ref (1 - Di (T - T_ref)) + (Di/gamma)(p - p_ref),
// so evaluating at reference conditions returns rho_ref exactly.
class KingMaterial : public MaterialModel {
 public:
  KingMaterial(double Di, double Ra, double gamma = 1.0, double T_top = 273.0 / 3000.0);
  explicit KingMaterial(const Config& cfg);

  void evaluate(const MaterialInputs& in, MaterialOutputs& out) const override;
  double reference_density(double depth) const override;
  double reference_temperature(double depth) const override;
  double reference_pressure(double depth) const override;
  Vec2 gravity(Pt) const override { return {0.0, -1.0}; }

  double Di() const { return Di_; }
  double Ra() const { return Ra_; }
  double surface_temperature() const { return T_top_; }

 private:
  double Di_, Ra_, gamma_, T_top_;
};

// Vertical-flow-through box with an arctangent reference density,
//   rho_ref(z) = 1.6 + arctan(c (z - 1/2)),
// whose compressibility peak at mid-depth steepens with c. Used to compare
// mass-conservation treatments at varying compressibility.
class ArctanMaterial : public MaterialModel {
 public:
  ArctanMaterial(double c, double Ra = 1e4, double Di = 0.1);
  explicit ArctanMaterial(const Config& cfg);

  void evaluate(const MaterialInputs& in, MaterialOutputs& out) const override;
  double reference_density(double depth) const override;
  Vec2 gravity(Pt) const override { return {0.0, -1.0}; }

  double c() const { return c_; }

 private:
  double c_, Ra_, Di_;
};

// Heavy rigid disk in a unit box: rho = 10, eta = 1e6 inside a circle of
// radius 1/8 at the center, rho = eta = 1 outside. The uniform background
// density only adds a hydrostatic pressure, so the reference density equals
// the outside value and buoyancy is the contrast.
class SinkerMaterial : public MaterialModel {
 public:
  SinkerMaterial() = default;
  explicit SinkerMaterial(const Config& cfg);

  void evaluate(const MaterialInputs& in, MaterialOutputs& out) const override;
  double reference_density(double) const override { return rho_out_; }
  Vec2 gravity(Pt) const override { return {0.0, -1.0}; }

 private:
  double rho_in_ = 10.0, eta_in_ = 1e6;
  double rho_out_ = 1.0, eta_out_ = 1.0;
  Pt center_{0.5, 0.5};
  double radius_ = 0.125;
};

// Uniform-property pipe with a single exothermic phase transition at fixed
// depth (zero Clapeyron slope by default): material descending through the
// transition releases latent heat via dS/dp. Defaults give an entropy-to-
// heat-capacity ratio of 0.2 and a diffusivity of 2e-4.
class LatentPipeMaterial : public MaterialModel {
 public:
  LatentPipeMaterial();
  explicit LatentPipeMaterial(const Config& cfg);

  void evaluate(const MaterialInputs& in, MaterialOutputs& out) const override;
  double reference_density(double) const override { return 0.0; }
  Vec2 gravity(Pt) const override { return {0.0, -g_}; }

  const PhaseTransition& transition() const { return transition_; }
  double cp() const { return cp_; }

 private:
  double cp_ = 1000.0;
  double k_ = 0.2;
  double g_ = 10.0;
  PhaseTransition transition_;
};

// Dimensional Boussinesq convection box with temperature-dependent
// viscosity eta = eta0 exp(-E (T - T_ref)/T_ref) and linear density
// rho0 (1 - alpha (T - T_ref)); used with finite-strain tracking.
class FiniteStrainMaterial : public MaterialModel {
 public:
  FiniteStrainMaterial() = default;
  explicit FiniteStrainMaterial(const Config& cfg);

  void evaluate(const MaterialInputs& in, MaterialOutputs& out) const override;
  double reference_density(double) const override { return rho0_; }
  double reference_temperature(double) const override { return T_ref_; }
  Vec2 gravity(Pt) const override { return {0.0, -g_}; }

 private:
  double rho0_ = 3400.0, alpha_ = 2e-5, T_ref_ = 1600.0;
  double k_ = 4.7, cp_ = 1250.0;
  double eta0_ = 5e21, E_ = 7.0;
  double g_ = 9.81;
};

// Layered mantle with two sharp transitions: viscosity prefactor and
// density jump change discontinuously at the given depths, with the same
// exponential temperature dependence as above. Exercises averaging and
// refinement indicators on genuinely discontinuous coefficients.
class PhaseLayeredMaterial : public MaterialModel {
 public:
  PhaseLayeredMaterial() = default;
  explicit PhaseLayeredMaterial(const Config& cfg);

  void evaluate(const MaterialInputs& in, MaterialOutputs& out) const override;
  double reference_density(double depth) const override;
  double reference_temperature(double) const override { return T_ref_; }
  Vec2 gravity(Pt) const override { return {0.0, -g_}; }

 private:
  std::vector<double> depths_ = {410e3, 660e3};
  std::vector<double> eta0_ = {1e21, 1e22, 1e23};
  std::vector<double> drho_ = {100.0, 200.0};
  double rho0_ = 3300.0, kappa_ = 5.124e-12, alpha_ = 4e-5;
  double E_ = 15.0, T_ref_ = 1600.0;
  double k_ = 4.7, cp_ = 1250.0;
  double g_ = 9.81;

  int layer(double depth) const;
};

// Clamps the wrapped model's viscosity to [eta_min, eta_max]; all other
// outputs pass through.
class ViscosityCutoff : public MaterialModel {
 public:
  ViscosityCutoff(std::unique_ptr<MaterialModel> inner, double eta_min, double eta_max);

  void evaluate(const MaterialInputs& in, MaterialOutputs& out) const override;
  double reference_density(double depth) const override;
  double reference_temperature(double depth) const override;
  double reference_pressure(double depth) const override;
  Vec2 gravity(Pt p) const override;
  int n_compositions() const override;

 private:
  std::unique_ptr<MaterialModel> inner_;
  double eta_min_, eta_max_;
};

// Builds a model from the [material] section (key `model`, then
// model-specific constants); optional eta_min/eta_max wrap the result.
std::unique_ptr<MaterialModel> make_material(const Config& cfg);

}  // namespace mconv
