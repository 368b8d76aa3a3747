#pragma once

// Krylov solvers and inner preconditioners. The outer flexible GMRES admits
// a preconditioner that is itself an iterative solve (so its action changes
// between applications); the inner solves wrap symmetric positive definite
// operators behind a uniform interface.

#include <functional>
#include <memory>
#include <string>

#include "mconv/types.hpp"

namespace mconv {

// y = op(x); vectors are pre-sized by the caller.
using LinOp = std::function<void(const Vec&, Vec&)>;

struct IterStats {
  int iterations = 0;
  double residual = 0.0;   // final relative residual
  bool converged = false;
};

// Preconditioned conjugate gradients on an SPD operator. `precond` may be
// null (identity). Convergence on the preconditioned residual norm relative
// to the right-hand side.
IterStats pcg(const LinOp& A, const Vec& b, Vec& x, const LinOp& precond, double rtol,
              int max_iter);

// Flexible GMRES(restart) with right preconditioning; `precond` may vary
// between applications (inner iterative solves). Converges on the true
// residual relative to ||b||.
IterStats fgmres(const LinOp& A, const Vec& b, Vec& x, const LinOp& precond, double rtol,
                 int max_iter, int restart = 50);

// One SPD solve context: factorization-based preconditioner plus a PCG loop,
// or a direct factorization. Used for the velocity-block and Schur inner
// solves of the Stokes preconditioner.
class InnerSolver {
 public:
  // ic0: incomplete Cholesky + CG (default); jacobi: diagonal + CG;
  // direct: sparse LDLT factorization, apply() is a single exact solve.
  enum class Kind { ic0, jacobi, direct };
  static Kind parse(const std::string& name);

  InnerSolver() = default;
  void setup(const SpMat& A, Kind kind);
  bool ready() const { return n_ > 0; }

  // y ~= A^{-1} x; returns iterations used (0 for direct).
  int apply(const Vec& x, Vec& y, double rtol, int max_iter) const;

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
  const SpMat* A_ = nullptr;
  Kind kind_ = Kind::ic0;
  int n_ = 0;
};

}  // namespace mconv
