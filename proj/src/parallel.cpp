#include "spillover/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace spillover {

int resolve_threads(int requested) {
    if (const char* env = std::getenv("SPILLOVER_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) return n;
        } catch (...) {
        }
    }
    if (requested > 0) return requested;
    return omp_get_max_threads();
}

void set_threads(int n) {
    if (n > 0) omp_set_num_threads(n);
}

int current_threads() { return omp_get_max_threads(); }

bool in_parallel_region() { return omp_in_parallel() != 0; }

}  // namespace spillover
