#pragma once

#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mconv::par {

// Global thread budget for cell kernels. 1 = serial reference path. The
// parallel path computes independent per-cell work; reductions (scatter-add
// into global matrices/vectors) always run serially in ascending cell order,
// so results are bitwise identical for any thread count.
int  threads();
void set_threads(int n);

template <class Body>
void for_each_cell(std::size_t n, Body&& body) {
#ifdef _OPENMP
  if (threads() > 1) {
#pragma omp parallel for schedule(static) num_threads(threads())
    for (long long c = 0; c < static_cast<long long>(n); ++c)
      body(static_cast<std::size_t>(c));
    return;
  }
#endif
  for (std::size_t c = 0; c < n; ++c) body(c);
}

// Two-phase assembly helper: `compute` fills one Local per cell (parallel),
// `scatter` folds them into global storage (serial, in cell order).
template <class Local, class Compute, class Scatter>
void assemble_cells(std::size_t n, Compute&& compute, Scatter&& scatter) {
  std::vector<Local> locals(n);
  for_each_cell(n, [&](std::size_t c) { compute(c, locals[c]); });
  for (std::size_t c = 0; c < n; ++c) scatter(c, locals[c]);
}

}  // namespace mconv::par
