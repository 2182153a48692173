#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ssada {

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// f(index, thread_id). Results must be written to per-index slots; callers
// reduce sequentially afterwards so float sums stay deterministic even under
// dynamic scheduling.
template <typename F>
void parallel_for(int n, F&& f) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
    for (int i = 0; i < n; ++i) f(i, omp_get_thread_num());
#else
    for (int i = 0; i < n; ++i) f(i, 0);
#endif
}

} // namespace ssada
