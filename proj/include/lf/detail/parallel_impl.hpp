#pragma once

#include <exception>
#include <vector>

namespace lf {

template <class Fn>
void parallel_for(std::size_t n, Exec exec, Fn&& fn) {
    if (exec.workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    const long long count = static_cast<long long>(n);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1) num_threads(exec.workers)
#endif
    for (long long i = 0; i < count; ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace lf
