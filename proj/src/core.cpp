#include "lf/core.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace lf {

Dataset Dataset::subset(std::span<const Index> idx) const {
    Dataset out;
    out.features.resize(static_cast<Eigen::Index>(idx.size()), features.cols());
    out.response.resize(static_cast<Eigen::Index>(idx.size()));
    if (signal) out.signal = Vector(static_cast<Eigen::Index>(idx.size()));
    for (Index k = 0; k < idx.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(idx[k]);
        const auto r = static_cast<Eigen::Index>(k);
        out.features.row(r) = features.row(i);
        out.response(r) = response(i);
        if (signal) (*out.signal)(r) = (*signal)(i);
    }
    out.feature_names = feature_names;
    return out;
}

void Dataset::validate() const {
    if (features.rows() != response.size())
        throw InvalidArgument("dataset: feature rows and response length differ");
    if (signal && signal->size() != response.size())
        throw InvalidArgument("dataset: signal length differs from response length");
    if (features.cols() < 1) throw InvalidArgument("dataset: need at least one feature");
    if (features.rows() < 2) throw InvalidArgument("dataset: need at least two rows");
    if (!feature_names.empty() && feature_names.size() != cols())
        throw InvalidArgument("dataset: feature_names length differs from column count");
    if (!features.allFinite() || !response.allFinite() || (signal && !signal->allFinite()))
        throw InvalidArgument("dataset: non-finite entry");
}

double sample_mean(std::span<const double> x) {
    if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    const double m = sample_mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return ss / static_cast<double>(x.size() - 1);
}

double sample_sd(std::span<const double> x) { return std::sqrt(sample_variance(x)); }

std::pair<Dataset, ResponseTransform> standardize_response(const Dataset& data) {
    if (data.rows() < 2) throw InvalidArgument("standardize_response: need n >= 2");
    std::span<const double> y(data.response.data(), data.rows());
    const double center = sample_mean(y);
    const double scale = sample_sd(y);
    if (!(scale > 0.0) || !std::isfinite(scale))
        throw DegenerateError("standardize_response: response is constant (sample sd = 0)");
    ResponseTransform t{center, scale};
    Dataset out = data;
    for (Eigen::Index i = 0; i < out.response.size(); ++i) out.response(i) = t.apply(out.response(i));
    return {std::move(out), t};
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    auto splitmix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return splitmix(splitmix(a) ^ (b * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : master_seed_(master_seed), stream_id_(stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32),
                      static_cast<std::uint32_t>(mix_seed(master_seed, stream_id))};
    engine_.seed(seq);
}

RngStream RngStream::child(std::uint64_t id) const {
    return RngStream(mix_seed(master_seed_, stream_id_), id);
}

double RngStream::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::normal() { return normal_(engine_); }

Index RngStream::uniform_index(Index n) {
    if (n == 0) throw InvalidArgument("uniform_index: n must be positive");
    // Rejection sampling keeps the draw exactly uniform.
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do {
        r = engine_();
    } while (r >= limit);
    return static_cast<Index>(r % bound);
}

RngStream derive_stream(std::uint64_t master_seed, std::uint64_t stream_id) {
    return RngStream(master_seed, stream_id);
}

SnrSpec SnrSpec::from_signal_variance(double phi, double s) {
    if (!(phi > 0.0)) throw DegenerateError("SnrSpec: signal variance must be positive");
    if (!(s > 0.0)) throw InvalidArgument("SnrSpec: SNR must be positive");
    return {phi, s, phi / s};
}

}  // namespace lf
