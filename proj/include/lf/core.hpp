#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace lf {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = std::size_t;

/// Thrown when an input violates a documented precondition.
class InvalidArgument : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when a computation hits a degenerate configuration (zero variance,
/// empty support, ...) that has no meaningful result.
class DegenerateError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Feature matrix, response, and (simulations only) the noiseless signal g(x).
struct Dataset {
    Matrix features;  // n x p, row-major so a row is one observation
    Vector response;
    std::optional<Vector> signal;
    std::vector<std::string> feature_names;

    Index rows() const { return static_cast<Index>(features.rows()); }
    Index cols() const { return static_cast<Index>(features.cols()); }
    std::span<const double> row(Index i) const {
        return {features.data() + i * cols(), cols()};
    }

    /// Rows subset in the given order (duplicates allowed).
    Dataset subset(std::span<const Index> rows) const;
    /// Throws InvalidArgument unless shapes agree, n >= 2, p >= 1 and all values are finite.
    void validate() const;
};

/// Affine map y -> (y - center) / scale.
struct ResponseTransform {
    double center = 0.0;
    double scale = 1.0;

    double apply(double y) const { return (y - center) / scale; }
    double invert(double z) const { return z * scale + center; }
    static ResponseTransform identity() { return {}; }
};

double sample_mean(std::span<const double> x);
/// Sample standard deviation with divisor n - 1.
double sample_sd(std::span<const double> x);
double sample_variance(std::span<const double> x);

/// Centers and scales the response to sample mean 0 and sample sd 1.
/// Throws DegenerateError for a constant response.
std::pair<Dataset, ResponseTransform> standardize_response(const Dataset& data);

/// Deterministic random stream keyed by (master_seed, stream_id).
///
/// Streams are plain values: copying one copies its position. Independent
/// sub-streams are obtained with child(), which hashes the parent key with a
/// label so that the derivation tree, not call order, fixes every sequence.
class RngStream {
  public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

    std::uint64_t master_seed() const { return master_seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    /// Stream for a sub-task; pure function of this stream's key and `id`.
    RngStream child(std::uint64_t id) const;

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on [0, 1).
    double uniform();
    double normal();
    /// Uniform integer on [0, n).
    Index uniform_index(Index n);
    bool bernoulli(double p) { return uniform() < p; }

    std::mt19937_64& engine() { return engine_; }

  private:
    std::uint64_t master_seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

RngStream derive_stream(std::uint64_t master_seed, std::uint64_t stream_id);

/// Stable 64-bit mix of a key pair (splitmix64 finalizer based).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// Signal variance phi, SNR s and the implied noise variance sigma2 = phi / s.
struct SnrSpec {
    double phi = 0.0;
    double s = 1.0;
    double sigma2 = 0.0;

    static SnrSpec from_signal_variance(double phi, double s);
};

}  // namespace lf
