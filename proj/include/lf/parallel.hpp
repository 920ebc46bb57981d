#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lf {

/// Worker count for the OpenMP kernels. `workers == 1` runs inline.
/// Every kernel writes into per-index slots and reduces serially afterwards,
/// so results do not depend on the worker count.
struct Exec {
    int workers = 1;

    static Exec serial() { return {1}; }
    static Exec hardware();
};

inline Exec Exec::hardware() {
#ifdef _OPENMP
    return {omp_get_max_threads()};
#else
    return {1};
#endif
}

/// Runs fn(i) for i in [0, n) with dynamic scheduling across `exec.workers` threads.
/// Exceptions thrown by fn are captured and the first one (lowest index) is rethrown.
template <class Fn>
void parallel_for(std::size_t n, Exec exec, Fn&& fn);

}  // namespace lf

#include "lf/detail/parallel_impl.hpp"
