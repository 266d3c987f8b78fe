#include "tstcc/parallel.hpp"

namespace tstcc::exec {

namespace {
Mode g_mode = Mode::parallel;
int g_cap = 0;
}  // namespace

Mode mode() { return g_mode; }

void set_mode(Mode m) { g_mode = m; }

void set_thread_cap(int n) {
    g_cap = n;
#ifdef _OPENMP
    if (n > 0) {
        int hw = omp_get_max_threads();
        omp_set_num_threads(n < hw ? n : hw);
    }
#endif
}

int thread_cap() { return g_cap; }

}  // namespace tstcc::exec
