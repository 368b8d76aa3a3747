#pragma once

// Advection of compositional fields and finite-strain tracking. Composition
// obeys dC/dt + u . grad C = Q with no physical diffusion; it is marched
// with the same variable-step BDF-2 and artificial-viscosity stabilization
// as the temperature, sources entering as per-step integrals so impulse
// components stay representable. Boundary faces where the flow enters the
// domain carry a weak upwind condition pinning each field to a far-field
// value (zero for compositions, identity components for the deformation);
// on the closed boxes of the convection benchmarks that term vanishes
// identically. Finite-strain mode reserves the first four fields for the
// deformation tensor F (row major: F_xx, F_xy, F_yx, F_yy), whose source
// G F is built from the current velocity gradient and the time-extrapolated
// previous deformation; the polar decomposition and the natural strain turn
// F into the stretch/rotation pair used for glyphs.

#include <functional>
#include <string>
#include <vector>

#include <Eigen/IterativeLinearSolvers>

#include "mconv/fieldops.hpp"
#include "mconv/space.hpp"

namespace mconv {

using Mat2 = Eigen::Matrix2d;

// Closed-form spectral decomposition of a symmetric 2x2 matrix;
// lambda1 >= lambda2, eigenvectors unit length and orthogonal.
struct SymEigen2 {
  double lambda1 = 0, lambda2 = 0;
  Vec2 v1 = Vec2::Zero(), v2 = Vec2::Zero();
};
SymEigen2 sym_eigen(double a11, double a12, double a22);

// F = L R with L symmetric positive definite (L^2 = F F^T) and R a
// rotation. Throws for (numerically) singular F.
struct PolarDecomposition {
  Mat2 stretch;   // L
  Mat2 rotation;  // R
};
PolarDecomposition polar_decompose(const Mat2& F);

// ln(lambda1/lambda2) of the stretch tensor plus its principal directions
// (the cross-glyph data); requires L SPD.
struct NaturalStrain {
  double value = 0;
  double lambda1 = 0, lambda2 = 0;
  Vec2 major = Vec2::Zero(), minor = Vec2::Zero();
};
NaturalStrain natural_strain(const Mat2& L);

// Deformation-source increment over one step: substeps = 1 gives the plain
// product dt * G * F; more substeps apply forward-Euler stages of the same
// product for stiff velocity gradients, ((I + dt/m G)^m - I) F.
Mat2 finite_strain_increment(const Mat2& G, const Mat2& F, double dt,
                             int substeps = 1);

// Integral of a field's source over one step at one point:
// f(p, t_old, dt) = \int_{t_old}^{t_old + dt} Q(p, tau) dtau.
using SourceIntegral = std::function<double(Pt, double, double)>;

struct TransportOptions {
  int quad_degree = 5;

  // Same per-cell artificial viscosity as the temperature equation (cap
  // beta h |u| and strong-residual limiter), with conductivity zero.
  bool stabilize = true;
  double beta = 0.026;
  double c_e = 1.0;

  // Forward-Euler stages per step inside the finite-strain increment.
  int strain_substeps = 1;

  // Weakly pin fields to their far-field value (zero for compositions,
  // identity for deformation components) on boundary faces where the flow
  // enters. Required for well-posedness whenever the flow crosses the
  // boundary; vanishes identically on closed boxes. Disable only for
  // idealized spatially uniform states, where zero-gradient inflow is the
  // exact model instead.
  bool fresh_inflow = true;

  double rtol = 1e-10;
  int max_iter = 400;
  int restart = 50;
};

struct TransportReport {
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  double mass = 0.0;        // integral of the field after the step
  double mass_error = 0.0;  // mass change not explained by the sources;
                            // equals the net boundary exchange when the
                            // flow crosses the domain boundary
};

// Owns the composition fields and their BDF-2 history; the field count and
// names are fixed at construction. Fields advance sequentially from the
// same (previous) time level, so coupled sources see consistent data.
class CompositionTransport {
 public:
  // finite_strain prepends the four reserved deformation components (each
  // initialized to the identity deformation) ahead of `names`.
  CompositionTransport(Mesh& mesh, std::vector<std::string> names,
                       bool finite_strain, TransportOptions opts);

  const FunctionSpace& space() const { return space_; }
  const ConstraintSet& constraints() const { return cs_; }
  int n_fields() const { return static_cast<int>(fields_.size()); }
  const std::string& name(int i) const { return fields_.at(i).name; }
  int index_of(const std::string& name) const;  // -1 when absent
  bool has_finite_strain() const { return finite_strain_; }

  Vec& field(int i) { return fields_.at(i).value; }
  const Vec& field(int i) const { return fields_.at(i).value; }
  void set_field(int i, const ScalarFn& f);
  void set_source(int i, SourceIntegral src);

  // Deformation tensor assembled from the four reserved fields at a node.
  Mat2 deformation_at(int dof) const;

  // Advance every field over [t_old, t_old + dt]; velocity is interleaved
  // on space() (nullptr for u = 0). Steps and the previous dt are tracked
  // internally: the first step after construction or reset() runs backward
  // Euler. Returns one report per field, in field order.
  std::vector<TransportReport> advance(const Vec* velocity, double t_old,
                                       double dt);

  // Forget the BDF history (e.g. after mesh adaptation re-seeds fields).
  void reset();

  int step_count() const { return step_; }

  // Stabilization viscosity per cell for one field, from the last advance.
  const std::vector<double>& stabilization(int i) const {
    return fields_.at(i).nu;
  }

 private:
  struct Field {
    std::string name;
    Vec value;  // current level
    Vec old1;   // previous level (valid once step_ >= 1)
    Vec old2;   // level before that (valid once step_ >= 2)
    SourceIntegral source;
    double inflow = 0.0;  // weak far-field value where the flow enters
    std::vector<double> nu;
  };

  void advance_field(Field& f, const Vec* velocity, const Vec* strain_star,
                     double t_old, double dt, double r, TransportReport& rep);

  Mesh& mesh_;
  TransportOptions opts_;
  FunctionSpace space_;
  ConstraintSet cs_;
  std::vector<Field> fields_;
  bool finite_strain_ = false;
  int step_ = 0;
  double dt_old_ = 0.0;
};

}  // namespace mconv
