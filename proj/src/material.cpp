#include "mconv/material.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mconv {

// ---------------------------------------------------------------------------
// MaterialModel base

double MaterialModel::reference_density(double) const { return 0.0; }

double MaterialModel::reference_temperature(double) const { return 0.0; }

double MaterialModel::reference_pressure(double depth) const {
  // Hydrostatic integral of the reference density; composite Simpson is
  // plenty for the smooth profiles used here, and this is never called in
  // assembly-hot loops.
  if (depth <= 0.0) return 0.0;
  const int n = 256;
  const double h = depth / n;
  const double g = gravity_magnitude();
  double sum = reference_density(0.0) + reference_density(depth);
  for (int i = 1; i < n; ++i)
    sum += (i % 2 ? 4.0 : 2.0) * reference_density(i * h);
  return g * sum * h / 3.0;
}

Vec2 MaterialModel::gravity(Pt) const { return {0.0, -1.0}; }

// ---------------------------------------------------------------------------
// Phase transitions

PhaseSample phase_function(double depth, double temperature, const PhaseTransition& tr) {
  require(tr.width > 0.0, "phase transition width must be positive");
  const double z_tr =
      tr.depth + tr.clapeyron * (temperature - tr.reference_T) / tr.rho_g;
  const double th = std::tanh((depth - z_tr) / tr.width);
  PhaseSample s;
  s.X = 0.5 * (1.0 + th);
  s.dX_dz = 0.5 * (1.0 - th * th) / tr.width;
  s.dX_dT = -s.dX_dz * tr.clapeyron / tr.rho_g;
  s.dX_dz_over_rho_g = s.dX_dz / tr.rho_g;
  return s;
}

void entropy_derivatives(double dX_dT, double dX_dp, double gamma, double delta_rho,
                         double rho, double& dS_dT, double& dS_dp) {
  MC_ASSERT(rho > 0.0, "entropy derivatives need a positive density");
  const double jump = gamma * delta_rho / (rho * rho);
  dS_dT = jump * dX_dT;
  dS_dp = jump * dX_dp;
}

// ---------------------------------------------------------------------------
// Averaging

Averaging parse_averaging(const std::string& name) {
  if (name == "none") return Averaging::none;
  if (name == "arithmetic") return Averaging::arithmetic;
  if (name == "harmonic") return Averaging::harmonic;
  if (name == "geometric") return Averaging::geometric;
  if (name == "max") return Averaging::max;
  if (name == "project_q1") return Averaging::project_q1;
  if (name == "project_q1_limited") return Averaging::project_q1_limited;
  fail("unknown averaging scheme '" + name +
       "' (expected none, arithmetic, harmonic, geometric, max, project_q1, "
       "project_q1_limited)");
}

std::string averaging_name(Averaging a) {
  switch (a) {
    case Averaging::none: return "none";
    case Averaging::arithmetic: return "arithmetic";
    case Averaging::harmonic: return "harmonic";
    case Averaging::geometric: return "geometric";
    case Averaging::max: return "max";
    case Averaging::project_q1: return "project_q1";
    case Averaging::project_q1_limited: return "project_q1_limited";
  }
  return "?";
}

namespace {

// Mean of sign-uniform values under a positive-only formula: all-zero data
// averages to zero and all-negative data mirrors the positive case, so that
// physically signed fields (e.g. drho_dT < 0) average sensibly. Mixed signs
// have no meaningful harmonic/geometric mean and are rejected.
template <typename MeanFn>
double signed_mean(const std::vector<double>& v, const char* what, MeanFn mean) {
  bool any_pos = false, any_neg = false;
  for (double x : v) {
    any_pos |= x > 0.0;
    any_neg |= x < 0.0;
  }
  if (any_pos && any_neg)
    fail(std::string(what) + " average of mixed-sign values in one cell");
  if (!any_pos && !any_neg) return 0.0;
  if (any_pos) {
    for (double x : v)
      if (x <= 0.0) fail(std::string(what) + " average needs sign-uniform values");
    return mean(v, +1.0);
  }
  for (double x : v)
    if (x >= 0.0) fail(std::string(what) + " average needs sign-uniform values");
  return -mean(v, -1.0);
}

void project_bilinear(const QuadratureRule& rule, std::vector<double>& v, bool limited) {
  const int nq = rule.size();
  MC_ASSERT(nq >= 4, "bilinear projection needs at least a 2x2 rule");
  double raw_min = v[0], raw_max = v[0];
  for (double x : v) {
    raw_min = std::min(raw_min, x);
    raw_max = std::max(raw_max, x);
  }
  // Weighted least squares against the bilinear basis at the quadrature
  // points -- the discrete L2 projection induced by the rule itself.
  Eigen::Matrix4d ata = Eigen::Matrix4d::Zero();
  Eigen::Vector4d atv = Eigen::Vector4d::Zero();
  for (int q = 0; q < nq; ++q) {
    double N[4];
    fe::shape(ElementType::q1, rule.points[q].x, rule.points[q].y, N);
    const double w = rule.weights[q];
    for (int i = 0; i < 4; ++i) {
      atv[i] += w * N[i] * v[q];
      for (int j = 0; j < 4; ++j) ata(i, j) += w * N[i] * N[j];
    }
  }
  const Eigen::Vector4d c = ata.ldlt().solve(atv);
  for (int q = 0; q < nq; ++q) {
    double N[4];
    fe::shape(ElementType::q1, rule.points[q].x, rule.points[q].y, N);
    double s = 0;
    for (int i = 0; i < 4; ++i) s += c[i] * N[i];
    v[q] = limited ? std::clamp(s, raw_min, raw_max) : s;
  }
}

}  // namespace

void average_values(Averaging scheme, const QuadratureRule& rule, std::vector<double>& v) {
  require(!v.empty(), "averaging needs at least one value");
  const int n = static_cast<int>(v.size());
  switch (scheme) {
    case Averaging::none:
      return;
    case Averaging::arithmetic: {
      double s = 0;
      for (double x : v) s += x;
      std::fill(v.begin(), v.end(), s / n);
      return;
    }
    case Averaging::harmonic: {
      const double m = signed_mean(v, "harmonic", [n](const std::vector<double>& a, double sign) {
        double s = 0;
        for (double x : a) s += 1.0 / (sign * x);
        return n / s;
      });
      std::fill(v.begin(), v.end(), m);
      return;
    }
    case Averaging::geometric: {
      const double m = signed_mean(v, "geometric", [n](const std::vector<double>& a, double sign) {
        double s = 0;
        for (double x : a) s += std::log(sign * x);
        return std::exp(s / n);
      });
      std::fill(v.begin(), v.end(), m);
      return;
    }
    case Averaging::max: {
      const double m = *std::max_element(v.begin(), v.end());
      std::fill(v.begin(), v.end(), m);
      return;
    }
    case Averaging::project_q1:
      project_bilinear(rule, v, false);
      return;
    case Averaging::project_q1_limited:
      project_bilinear(rule, v, true);
      return;
  }
}

void average_cell(Averaging scheme, const QuadratureRule& rule,
                  std::vector<MaterialOutputs>& outputs) {
  if (scheme == Averaging::none) return;
  MC_ASSERT(static_cast<int>(outputs.size()) == rule.size(),
            "one MaterialOutputs entry per quadrature point");
  static constexpr double MaterialOutputs::* kFields[] = {
      &MaterialOutputs::eta,     &MaterialOutputs::rho,     &MaterialOutputs::cp,
      &MaterialOutputs::k,       &MaterialOutputs::alpha,   &MaterialOutputs::drho_dp,
      &MaterialOutputs::drho_dT, &MaterialOutputs::dS_dT,   &MaterialOutputs::dS_dp,
      &MaterialOutputs::H,
  };
  thread_local std::vector<double> scratch;
  scratch.resize(outputs.size());
  for (auto field : kFields) {
    for (std::size_t q = 0; q < outputs.size(); ++q) scratch[q] = outputs[q].*field;
    average_values(scheme, rule, scratch);
    for (std::size_t q = 0; q < outputs.size(); ++q) outputs[q].*field = scratch[q];
  }
}

// ---------------------------------------------------------------------------
// ConstantMaterial

ConstantMaterial::ConstantMaterial(const Config& cfg) {
  values.eta = cfg.get_double("material", "eta", 1.0);
  values.rho = cfg.get_double("material", "rho", 1.0);
  values.cp = cfg.get_double("material", "cp", 1.0);
  values.k = cfg.get_double("material", "k", 1.0);
  values.alpha = cfg.get_double("material", "alpha", 0.0);
  values.drho_dp = cfg.get_double("material", "drho_dp", 0.0);
  values.drho_dT = cfg.get_double("material", "drho_dT", 0.0);
  values.H = cfg.get_double("material", "heating", 0.0);
  reference_rho = cfg.get_double("material", "reference_density", 0.0);
  g_ = cfg.get_double("material", "gravity", 1.0);
  require(values.eta > 0 && values.rho > 0 && values.cp > 0 && values.k >= 0,
          "constant material needs eta, rho, cp > 0 and k >= 0");
}

void ConstantMaterial::evaluate(const MaterialInputs&, MaterialOutputs& out) const {
  out = values;
}

double ConstantMaterial::reference_density(double) const { return reference_rho; }

// ---------------------------------------------------------------------------
// KingMaterial

KingMaterial::KingMaterial(double Di, double Ra, double gamma, double T_top)
    : Di_(Di), Ra_(Ra), gamma_(gamma), T_top_(T_top) {
  require(Di_ > 0 && Ra_ > 0 && gamma_ > 0, "King material needs Di, Ra, gamma > 0");
}

KingMaterial::KingMaterial(const Config& cfg)
    : KingMaterial(cfg.get_double("material", "Di", 0.25),
                   cfg.get_double("material", "Ra", 1e4),
                   cfg.get_double("material", "gamma", 1.0),
                   cfg.get_double("material", "surface_temperature", 273.0 / 3000.0)) {}

void KingMaterial::evaluate(const MaterialInputs& in, MaterialOutputs& out) const {
  const double rho_ref = reference_density(in.depth);
  const double T_ref = reference_temperature(in.depth);
  out.eta = Di_ / Ra_;
  out.alpha = Di_;
  out.cp = 1.0;
  out.k = 1.0;
  out.H = 0.0;
  out.drho_dp = Di_ / gamma_;
  out.drho_dT = -rho_ref * Di_;
  out.rho = rho_ref * (1.0 - Di_ * (in.temperature - T_ref)) +
            out.drho_dp * (in.pressure - reference_pressure(in.depth));
  out.dS_dT = 0.0;
  out.dS_dp = 0.0;
}

double KingMaterial::reference_density(double depth) const {
  return std::exp(depth * Di_ / gamma_);
}

double KingMaterial::reference_temperature(double depth) const {
  return T_top_ * std::exp(depth * Di_);
}

double KingMaterial::reference_pressure(double depth) const {
  // d p_ref / d depth = rho_ref * g with g = 1.
  return (gamma_ / Di_) * (std::exp(depth * Di_ / gamma_) - 1.0);
}

// ---------------------------------------------------------------------------
// ArctanMaterial

ArctanMaterial::ArctanMaterial(double c, double Ra, double Di) : c_(c), Ra_(Ra), Di_(Di) {
  require(c_ >= 0 && Ra_ > 0 && Di_ > 0, "arctan material needs c >= 0, Ra, Di > 0");
}

ArctanMaterial::ArctanMaterial(const Config& cfg)
    : ArctanMaterial(cfg.get_double("material", "c", 0.0),
                     cfg.get_double("material", "Ra", 1e4),
                     cfg.get_double("material", "Di", 0.1)) {}

void ArctanMaterial::evaluate(const MaterialInputs& in, MaterialOutputs& out) const {
  const double rho_ref = reference_density(in.depth);
  const double s = in.depth - 0.5;
  const double drho_dz = c_ / (1.0 + c_ * c_ * s * s);
  out.eta = Di_ / Ra_;
  out.alpha = Di_;
  out.cp = 1.0;
  out.k = 1.0;
  out.H = 0.0;
  out.rho = rho_ref * (1.0 - Di_ * in.temperature);
  out.drho_dT = -rho_ref * Di_;
  // Density slope along pressure through the hydrostatic reference,
  // d rho / dp = (d rho / dz) / (rho g); the mass-row coefficient
  // (drho_dp * g) . u then reduces to (rho'/rho) u_down exactly.
  out.drho_dp = drho_dz / rho_ref;
  out.dS_dT = 0.0;
  out.dS_dp = 0.0;
}

double ArctanMaterial::reference_density(double depth) const {
  return 1.6 + std::atan(c_ * (depth - 0.5));
}

// ---------------------------------------------------------------------------
// SinkerMaterial

SinkerMaterial::SinkerMaterial(const Config& cfg) {
  rho_in_ = cfg.get_double("material", "rho_inside", 10.0);
  eta_in_ = cfg.get_double("material", "eta_inside", 1e6);
  rho_out_ = cfg.get_double("material", "rho_outside", 1.0);
  eta_out_ = cfg.get_double("material", "eta_outside", 1.0);
  center_ = {cfg.get_double("material", "center_x", 0.5),
             cfg.get_double("material", "center_y", 0.5)};
  radius_ = cfg.get_double("material", "radius", 0.125);
}

void SinkerMaterial::evaluate(const MaterialInputs& in, MaterialOutputs& out) const {
  const double dx = in.position.x - center_.x;
  const double dy = in.position.y - center_.y;
  const bool inside = dx * dx + dy * dy <= radius_ * radius_;
  out = MaterialOutputs{};
  out.eta = inside ? eta_in_ : eta_out_;
  out.rho = inside ? rho_in_ : rho_out_;
  out.cp = 1.0;
  out.k = 1.0;
}

// ---------------------------------------------------------------------------
// LatentPipeMaterial

LatentPipeMaterial::LatentPipeMaterial() {
  transition_.depth = 0.75;
  transition_.width = 1.0 / 128.0;
  transition_.clapeyron = 0.0;
  transition_.delta_S = 200.0;
  transition_.reference_T = 1000.0;
  transition_.rho_g = 1.0 * g_;
}

LatentPipeMaterial::LatentPipeMaterial(const Config& cfg) : LatentPipeMaterial() {
  cp_ = cfg.get_double("material", "cp", cp_);
  k_ = cfg.get_double("material", "k", k_);
  g_ = cfg.get_double("material", "gravity", g_);
  transition_.depth = cfg.get_double("material", "transition_depth", transition_.depth);
  transition_.width = cfg.get_double("material", "transition_width", transition_.width);
  transition_.clapeyron = cfg.get_double("material", "clapeyron", transition_.clapeyron);
  transition_.delta_S = cfg.get_double("material", "delta_S", 200.0);
  transition_.reference_T = cfg.get_double("material", "transition_T", 1000.0);
  transition_.rho_g = 1.0 * g_;
}

void LatentPipeMaterial::evaluate(const MaterialInputs& in, MaterialOutputs& out) const {
  out = MaterialOutputs{};
  out.eta = 1.0;
  out.rho = 1.0;
  out.cp = cp_;
  out.k = k_;
  out.alpha = 0.0;
  const PhaseSample ph = phase_function(in.depth, in.temperature, transition_);
  const double dS = transition_.entropy_jump(out.rho);
  out.dS_dT = dS * ph.dX_dT;
  out.dS_dp = dS * ph.dX_dp();
}

// ---------------------------------------------------------------------------
// FiniteStrainMaterial

FiniteStrainMaterial::FiniteStrainMaterial(const Config& cfg) {
  rho0_ = cfg.get_double("material", "rho0", rho0_);
  alpha_ = cfg.get_double("material", "alpha", alpha_);
  T_ref_ = cfg.get_double("material", "T_ref", T_ref_);
  k_ = cfg.get_double("material", "k", k_);
  cp_ = cfg.get_double("material", "cp", cp_);
  eta0_ = cfg.get_double("material", "eta0", eta0_);
  E_ = cfg.get_double("material", "activation", E_);
  g_ = cfg.get_double("material", "gravity", g_);
}

void FiniteStrainMaterial::evaluate(const MaterialInputs& in, MaterialOutputs& out) const {
  out = MaterialOutputs{};
  out.eta = eta0_ * std::exp(-E_ * (in.temperature - T_ref_) / T_ref_);
  out.rho = rho0_ * (1.0 - alpha_ * (in.temperature - T_ref_));
  out.drho_dT = -rho0_ * alpha_;
  out.cp = cp_;
  out.k = k_;
  out.alpha = alpha_;
}

// ---------------------------------------------------------------------------
// PhaseLayeredMaterial

PhaseLayeredMaterial::PhaseLayeredMaterial(const Config& cfg) : PhaseLayeredMaterial() {
  rho0_ = cfg.get_double("material", "rho0", rho0_);
  kappa_ = cfg.get_double("material", "compressibility", kappa_);
  alpha_ = cfg.get_double("material", "alpha", alpha_);
  E_ = cfg.get_double("material", "activation", E_);
  T_ref_ = cfg.get_double("material", "T_ref", T_ref_);
  k_ = cfg.get_double("material", "k", k_);
  cp_ = cfg.get_double("material", "cp", cp_);
  g_ = cfg.get_double("material", "gravity", g_);
  if (cfg.has("material", "transition_depths")) {
    // comma-separated list; layer constants must match its length + 1
    depths_.clear();
    std::string s = cfg.get_string("material", "transition_depths");
    std::size_t pos = 0;
    while (pos < s.size()) {
      std::size_t comma = s.find(',', pos);
      if (comma == std::string::npos) comma = s.size();
      depths_.push_back(std::stod(s.substr(pos, comma - pos)));
      pos = comma + 1;
    }
    require(depths_.size() + 1 == eta0_.size() && depths_.size() == drho_.size(),
            "transition_depths must list one depth per built-in transition");
  }
}

int PhaseLayeredMaterial::layer(double depth) const {
  int l = 0;
  while (l < static_cast<int>(depths_.size()) && depth > depths_[l]) ++l;
  return l;
}

void PhaseLayeredMaterial::evaluate(const MaterialInputs& in, MaterialOutputs& out) const {
  const int l = layer(in.depth);
  const double thermal = 1.0 - alpha_ * (in.temperature - T_ref_);
  double jump = 0.0;
  for (int i = 0; i < l; ++i) jump += drho_[i];
  out = MaterialOutputs{};
  out.eta = eta0_[l] * std::exp(-E_ * (in.temperature - T_ref_) / T_ref_);
  out.rho = rho0_ * (1.0 + kappa_ * in.pressure) * thermal + jump;
  out.drho_dp = rho0_ * kappa_ * thermal;
  out.drho_dT = -rho0_ * (1.0 + kappa_ * in.pressure) * alpha_;
  out.cp = cp_;
  out.k = k_;
  out.alpha = alpha_;
}

double PhaseLayeredMaterial::reference_density(double depth) const {
  // Layered background without self-compression; adequate for buoyancy
  // subtraction and refinement studies on this model.
  double rho = rho0_;
  for (int i = 0; i < layer(depth); ++i) rho += drho_[i];
  return rho;
}

// ---------------------------------------------------------------------------
// ViscosityCutoff

ViscosityCutoff::ViscosityCutoff(std::unique_ptr<MaterialModel> inner, double eta_min,
                                 double eta_max)
    : inner_(std::move(inner)), eta_min_(eta_min), eta_max_(eta_max) {
  require(inner_ != nullptr, "viscosity cutoff needs a model to wrap");
  require(eta_min_ >= 0 && eta_min_ <= eta_max_, "viscosity cutoff needs 0 <= min <= max");
}

void ViscosityCutoff::evaluate(const MaterialInputs& in, MaterialOutputs& out) const {
  inner_->evaluate(in, out);
  out.eta = std::clamp(out.eta, eta_min_, eta_max_);
}

double ViscosityCutoff::reference_density(double depth) const {
  return inner_->reference_density(depth);
}
double ViscosityCutoff::reference_temperature(double depth) const {
  return inner_->reference_temperature(depth);
}
double ViscosityCutoff::reference_pressure(double depth) const {
  return inner_->reference_pressure(depth);
}
Vec2 ViscosityCutoff::gravity(Pt p) const { return inner_->gravity(p); }
int ViscosityCutoff::n_compositions() const { return inner_->n_compositions(); }

// ---------------------------------------------------------------------------
// Factory

std::unique_ptr<MaterialModel> make_material(const Config& cfg) {
  const std::string model = cfg.get_string("material", "model", "constant");
  std::unique_ptr<MaterialModel> m;
  if (model == "constant")
    m = std::make_unique<ConstantMaterial>(cfg);
  else if (model == "king")
    m = std::make_unique<KingMaterial>(cfg);
  else if (model == "arctan")
    m = std::make_unique<ArctanMaterial>(cfg);
  else if (model == "sinker")
    m = std::make_unique<SinkerMaterial>(cfg);
  else if (model == "latent_pipe")
    m = std::make_unique<LatentPipeMaterial>(cfg);
  else if (model == "finite_strain")
    m = std::make_unique<FiniteStrainMaterial>(cfg);
  else if (model == "phase_layered")
    m = std::make_unique<PhaseLayeredMaterial>(cfg);
  else
    fail("unknown material model '" + model + "'");

  if (cfg.has("material", "eta_min") || cfg.has("material", "eta_max")) {
    const double lo = cfg.get_double("material", "eta_min", 0.0);
    const double hi =
        cfg.get_double("material", "eta_max", std::numeric_limits<double>::infinity());
    m = std::make_unique<ViscosityCutoff>(std::move(m), lo, hi);
  }
  return m;
}

}  // namespace mconv
