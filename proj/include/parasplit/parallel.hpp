#pragma once

#include <Eigen/Core>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace parasplit {

/// Runs body(i) for i in [0, count). Iterations must be independent; each one
/// is executed exactly once, so results do not depend on the thread count.
template <class Body>
void parallel_for(Eigen::Index count, int threads, Body&& body) {
#if defined(_OPENMP)
  if (threads > 1 && count > 1) {
#pragma omp parallel for schedule(static) num_threads(threads)
    for (Eigen::Index i = 0; i < count; ++i) {
      body(i);
    }
    return;
  }
#endif
  for (Eigen::Index i = 0; i < count; ++i) {
    body(i);
  }
}

inline bool parallel_enabled() {
#if defined(_OPENMP)
  return true;
#else
  return false;
#endif
}

}  // namespace parasplit
