#pragma once

#include <cstddef>

namespace spillover {

/// Selects the serial reference loop or the OpenMP kernel. Both write results
/// into per-index slots and reduce in index order, so they agree bit for bit.
enum class Exec { Serial, Parallel };

/// Thread count after applying the SPILLOVER_THREADS environment override.
/// requested <= 0 means "library default".
int resolve_threads(int requested);
void set_threads(int n);
int current_threads();
/// True when called from inside an active parallel region.
bool in_parallel_region();

template <class F>
void for_each_index(std::size_t n, Exec exec, F&& body) {
    if (exec == Exec::Serial || n < 2 || in_parallel_region()) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 16)
    for (long long i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
}

}  // namespace spillover
