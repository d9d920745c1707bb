#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

#include <cstdlib>

namespace cloth {

/// Worker count used by node-parallel loops. Defaults to CLOTHSIM_THREADS
/// from the environment, else 1. All parallel loops write per-node outputs
/// or reduce in fixed chunk order, so results are bit-identical for any
/// thread count.
int thread_count();
void set_thread_count(int n);

/// Runs fn(i) for i in [0, n). Parallel when more than one thread is
/// configured and OpenMP is available.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
#ifdef _OPENMP
  if (thread_count() > 1) {
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
#endif
  for (int i = 0; i < n; ++i) fn(i);
}

}  // namespace cloth
