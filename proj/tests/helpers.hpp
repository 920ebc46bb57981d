#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "lf/core.hpp"

namespace lf::test {

// y = 2 x1 - x2 + x1 x3 + noise on standard normal features.
inline Dataset toy_data(Index n, Index p, std::uint64_t seed, double noise = 0.5) {
    RngStream rng(seed, 99);
    Dataset d;
    d.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    d.response.resize(static_cast<Eigen::Index>(n));
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j) d.features(i, j) = rng.normal();
    for (Index i = 0; i < n; ++i) {
        const double x1 = d.features(i, 0);
        const double x2 = p > 1 ? d.features(i, 1) : 0.0;
        const double x3 = p > 2 ? d.features(i, 2) : 0.0;
        d.response(i) = 2.0 * x1 - x2 + x1 * x3 + noise * rng.normal();
    }
    for (Index j = 0; j < p; ++j) d.feature_names.push_back("x" + std::to_string(j + 1));
    return d;
}

inline double max_abs_diff(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace lf::test
