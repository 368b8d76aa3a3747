#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mconv {

using Vec   = Eigen::VectorXd;
using MatX  = Eigen::MatrixXd;
using Mat2  = Eigen::Matrix2d;
using Vec2  = Eigen::Vector2d;
// Row-major so that matrix-vector products stream rows; all assembly goes
// through a precomputed sparsity pattern, after which only existing entries
// are touched.
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Pt {
  double x = 0.0;
  double y = 0.0;
};

inline Pt operator+(Pt a, Pt b) { return {a.x + b.x, a.y + b.y}; }

// Error for anything a user can get wrong (configs, impossible requests).
// Internal invariant violations use MC_ASSERT and indicate bugs.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}

#define MC_ASSERT(cond, msg)                                                  \
  do {                                                                        \
    if (!(cond)) throw ::mconv::Error(std::string("internal error: ") + msg); \
  } while (0)

}  // namespace mconv
