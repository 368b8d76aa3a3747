#include "mconv/linalg.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <cmath>

namespace mconv {

IterStats pcg(const LinOp& A, const Vec& b, Vec& x, const LinOp& precond, double rtol,
              int max_iter) {
  IterStats stats;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    x.setZero();
    stats.converged = true;
    return stats;
  }
  const int n = static_cast<int>(b.size());
  Vec r(n), z(n), p(n), Ap(n);
  if (x.size() != n) x = Vec::Zero(n);
  A(x, Ap);
  r = b - Ap;
  if (precond)
    precond(r, z);
  else
    z = r;
  p = z;
  double rz = r.dot(z);
  for (int it = 0; it < max_iter; ++it) {
    stats.residual = r.norm() / bnorm;
    if (stats.residual < rtol) {
      stats.converged = true;
      return stats;
    }
    A(p, Ap);
    const double pAp = p.dot(Ap);
    MC_ASSERT(pAp > 0.0, "conjugate gradients on a non-positive operator");
    const double alpha = rz / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    if (precond)
      precond(r, z);
    else
      z = r;
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
    ++stats.iterations;
  }
  stats.residual = r.norm() / bnorm;
  stats.converged = stats.residual < rtol;
  return stats;
}

IterStats fgmres(const LinOp& A, const Vec& b, Vec& x, const LinOp& precond, double rtol,
                 int max_iter, int restart) {
  IterStats stats;
  const int n = static_cast<int>(b.size());
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    x.setZero();
    stats.converged = true;
    return stats;
  }
  if (x.size() != n) x = Vec::Zero(n);

  const int m = restart;
  MatX V(n, m + 1);   // Krylov basis
  MatX Z(n, m);       // preconditioned directions (flexible: stored per step)
  MatX H = MatX::Zero(m + 1, m);
  Vec cs(m), sn(m), g(m + 1), w(n), tmp(n);

  while (stats.iterations < max_iter) {
    A(x, tmp);
    Vec r = b - tmp;
    double beta = r.norm();
    stats.residual = beta / bnorm;
    if (stats.residual < rtol) {
      stats.converged = true;
      return stats;
    }
    V.col(0) = r / beta;
    g.setZero();
    g[0] = beta;

    int j = 0;
    for (; j < m && stats.iterations < max_iter; ++j, ++stats.iterations) {
      Vec zj(n);
      if (precond)
        precond(V.col(j), zj);
      else
        zj = V.col(j);
      Z.col(j) = zj;
      A(zj, w);
      // modified Gram-Schmidt
      for (int i = 0; i <= j; ++i) {
        H(i, j) = w.dot(V.col(i));
        w -= H(i, j) * V.col(i);
      }
      H(j + 1, j) = w.norm();
      if (H(j + 1, j) > 0.0) V.col(j + 1) = w / H(j + 1, j);

      // apply accumulated Givens rotations, then form a new one
      for (int i = 0; i < j; ++i) {
        const double t = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
        H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
        H(i, j) = t;
      }
      const double denom = std::hypot(H(j, j), H(j + 1, j));
      if (denom == 0.0) {
        cs[j] = 1.0;
        sn[j] = 0.0;
      } else {
        cs[j] = H(j, j) / denom;
        sn[j] = H(j + 1, j) / denom;
      }
      H(j, j) = denom;
      H(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];

      stats.residual = std::abs(g[j + 1]) / bnorm;
      if (stats.residual < rtol) {
        ++j;
        ++stats.iterations;
        break;
      }
    }

    // solve the triangular least-squares system and update x
    Vec y = Vec::Zero(j);
    for (int i = j - 1; i >= 0; --i) {
      double s = g[i];
      for (int k = i + 1; k < j; ++k) s -= H(i, k) * y[k];
      MC_ASSERT(H(i, i) != 0.0, "singular Hessenberg block in GMRES");
      y[i] = s / H(i, i);
    }
    for (int k = 0; k < j; ++k) x += y[k] * Z.col(k);

    if (stats.residual < rtol) {
      // confirm with the true residual (restart otherwise)
      A(x, tmp);
      stats.residual = (b - tmp).norm() / bnorm;
      if (stats.residual < rtol) {
        stats.converged = true;
        return stats;
      }
    }
    if (j == 0) break;  // no progress possible
  }
  return stats;
}

// ---------------------------------------------------------------------------
// InnerSolver

using SpMatCol = Eigen::SparseMatrix<double>;

struct InnerSolver::Impl {
  SpMatCol A_col;  // factorizations want column storage
  Eigen::IncompleteCholesky<double> ic;
  Eigen::SimplicialLDLT<SpMatCol> ldlt;
  Vec inv_diag;
};

InnerSolver::Kind InnerSolver::parse(const std::string& name) {
  if (name == "ic0" || name == "incomplete_cholesky") return Kind::ic0;
  if (name == "jacobi" || name == "diagonal") return Kind::jacobi;
  if (name == "direct" || name == "ldlt") return Kind::direct;
  fail("unknown inner solver '" + name + "' (expected ic0, jacobi, direct)");
}

void InnerSolver::setup(const SpMat& A, Kind kind) {
  MC_ASSERT(A.rows() == A.cols(), "inner solver needs a square matrix");
  A_ = &A;
  kind_ = kind;
  n_ = static_cast<int>(A.rows());
  impl_ = std::make_shared<Impl>();
  switch (kind_) {
    case Kind::jacobi: {
      impl_->inv_diag = Vec::Ones(n_);
      for (int i = 0; i < n_; ++i) {
        const double d = A.coeff(i, i);
        MC_ASSERT(d > 0.0, "Jacobi preconditioner needs a positive diagonal");
        impl_->inv_diag[i] = 1.0 / d;
      }
      break;
    }
    case Kind::ic0: {
      impl_->A_col = SpMatCol(A);
      impl_->ic.compute(impl_->A_col);
      MC_ASSERT(impl_->ic.info() == Eigen::Success,
                "incomplete Cholesky factorization failed");
      break;
    }
    case Kind::direct: {
      impl_->A_col = SpMatCol(A);
      impl_->ldlt.compute(impl_->A_col);
      MC_ASSERT(impl_->ldlt.info() == Eigen::Success, "sparse LDLT factorization failed");
      break;
    }
  }
}

int InnerSolver::apply(const Vec& x, Vec& y, double rtol, int max_iter) const {
  MC_ASSERT(ready(), "inner solver used before setup");
  if (kind_ == Kind::direct) {
    y = impl_->ldlt.solve(x);
    return 0;
  }
  const SpMat& A = *A_;
  LinOp op = [&A](const Vec& in, Vec& out) { out.noalias() = A * in; };
  LinOp pre;
  if (kind_ == Kind::jacobi) {
    const Vec& d = impl_->inv_diag;
    pre = [&d](const Vec& in, Vec& out) { out = d.cwiseProduct(in); };
  } else {
    const auto* ic = &impl_->ic;
    pre = [ic](const Vec& in, Vec& out) { out = ic->solve(in); };
  }
  if (y.size() != x.size()) y = Vec::Zero(x.size());
  y.setZero();
  const IterStats s = pcg(op, x, y, pre, rtol, max_iter);
  return s.iterations;
}

}  // namespace mconv
