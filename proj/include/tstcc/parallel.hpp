#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tstcc::exec {

enum class Mode { serial, parallel };

Mode mode();
void set_mode(Mode m);

// Caps OpenMP worker threads; 0 means "no cap".
void set_thread_cap(int n);
int thread_cap();

// Runs f(i) for i in [0, n). Iterations must be independent; each iteration
// owns its outputs, so results are identical in serial and parallel mode.
template <class F>
inline void parallel_for(int64_t n, F&& f) {
#ifdef _OPENMP
    if (mode() == Mode::parallel && n > 1) {
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i) f(i);
        return;
    }
#endif
    for (int64_t i = 0; i < n; ++i) f(i);
}

}  // namespace tstcc::exec
