#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lf/ensemble.hpp"
#include "lf/experiments.hpp"
#include "lf/io.hpp"
#include "lf/theory.hpp"

namespace lf::config {

using io::Json;

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Reads keys from one JSON object and rejects any key nobody asked for.
class StrictObject {
  public:
    StrictObject(const Json& j, std::string where);

    bool has(const std::string& key);
    template <class T>
    T get(const std::string& key, T fallback);
    const Json& section(const std::string& key);
    /// Throws ConfigError naming the first unknown key.
    void finish() const;

  private:
    const Json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

FitConfig parse_fit(const Json& j);
Json to_json(const FitConfig& c);

experiments::SweepConfig parse_sweep(const Json& j);
Json to_json(const experiments::SweepConfig& c);

struct OracleRun {
    Index J = 20;
    Index N = 200;
    double sigma = 1.0;
    double gamma0 = 0.0;
    Index trials = 2000;
    Index test_points = 50;
    std::vector<double> thetas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
};

struct TheoryRun {
    std::optional<OracleRun> oracle;
    std::optional<theory::MinNormConfig> min_norm;
    std::optional<theory::ScalingConfig> scaling;  // run in both learner modes
};

/// An empty object selects every section with defaults.
TheoryRun parse_theory(const Json& j);
Json to_json(const TheoryRun& r);

/// `fit` command settings.
struct FitRun {
    std::string estimator = "lassoed";  // or "post_selection"
    double test_fraction = 0.0;         // held-out share scored after fitting
    FitConfig fit;
};
FitRun parse_fit_run(const Json& j);
Json to_json(const FitRun& r);

/// Optional top-level "seed" of a run config.
std::optional<std::uint64_t> seed_of(const Json& j);
/// The config without its "seed" member, for hashing.
Json without_seed(const Json& j);

/// FNV-1a 64 of the compact dump, as 16 lowercase hex digits.
std::string config_hash(const Json& canonical);

}  // namespace lf::config
