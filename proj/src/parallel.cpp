#include "dynaspect/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef DYNASPECT_HAVE_OPENMP
#include <omp.h>
#endif

namespace dynaspect {

int configure_threads_from_env() {
    int requested = 0;
    if (const char* env = std::getenv("DYNASPECT_THREADS")) {
        try {
            requested = std::stoi(env);
        } catch (const std::exception&) {
            requested = 0;
        }
    }
#ifdef DYNASPECT_HAVE_OPENMP
    if (requested > 0)
        omp_set_num_threads(requested);
    return omp_get_max_threads();
#else
    (void)requested;
    return 1;
#endif
}

} // namespace dynaspect
