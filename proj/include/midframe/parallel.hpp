#pragma once

#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace midframe {

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

// Row-parallel map. Each row writes a disjoint slice, so the result is
// bit-identical for any thread count.
template <class F>
void parallel_rows(int rows, F&& f) {
#pragma omp parallel for schedule(static)
  for (int y = 0; y < rows; ++y) f(y);
}

// Deterministic parallel reduction: per-row partials summed in row order,
// independent of how rows were scheduled.
template <class F>
double parallel_row_sum(int rows, F&& row_sum) {
  std::vector<double> partial(static_cast<size_t>(rows), 0.0);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < rows; ++y) partial[static_cast<size_t>(y)] = row_sum(y);
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

}  // namespace midframe
