#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "lf/core.hpp"
#include "lf/ensemble.hpp"
#include "lf/parallel.hpp"
#include "lf/simgen.hpp"

namespace lf::experiments {

enum class Method { vanilla, post_selection, lassoed };
inline constexpr std::array<Method, 3> kMethods{Method::vanilla, Method::post_selection, Method::lassoed};
const char* method_name(Method m);

enum class DgpKind { polynomial, tree, fixed_support };
const char* dgp_name(DgpKind k);

struct SweepConfig {
    DgpKind dgp = DgpKind::polynomial;
    PolyDgpSpec poly;        // polynomial and fixed_support (n, p, c, pi)
    TreeDgpSpec tree;
    Index support = 5;       // fixed_support: alpha_1..alpha_support = c
    std::vector<double> snr_grid{0.5, 2.0, 8.0};
    Index replications = 20;
    Index test_size = 1000;
    FitConfig fit;

    Index n() const;
    Index p() const;
    void validate() const;
};

/// One (snr, method, replication) cell.
struct CellRecord {
    double snr = 0.0;
    Index rep = 0;
    Method method = Method::vanilla;
    double test_mse = 0.0;    // against the noisy test response
    double signal_mse = 0.0;  // against the noiseless signal
    double theta_hat = 0.0;
    double est_error = 0.0;   // the method's own error estimate (vanilla: OOB on the forest half)
    double est_error_heldout = std::numeric_limits<double>::quiet_NaN();  // vanilla only: MSE on the selection half
    // Importance, filled when requested. recovery is NaN when kappa is undefined.
    bool importance_ok = false;
    bool weighted_counts_nonnegative = false;
    double kappa_sum = 0.0;
    double recovery = 0.0;
};

/// Everything a study produced, in (snr, rep, method) order.
struct StudyResult {
    SweepConfig config;
    double phi = 0.0;
    std::vector<double> sigma2;            // per snr
    Vector test_signal;
    std::vector<CellRecord> records;
    // predictions[snr][method] is replications x test_size, when kept
    std::vector<std::array<Matrix, 3>> predictions;

    const CellRecord& at(Index snr_index, Index rep, Method m) const;
};

struct StudyOptions {
    bool keep_predictions = false;
    bool importance = false;
    bool absolute_weights = false;
};

/// Coefficients drawn once (rng.child(1)); fixed test design (rng.child(2));
/// replication r draws its training design, standard noise and test noise from
/// rng.child(3).child(r) and reuses them across the SNR grid with the noise
/// scaled per level; the fit seed of replication r is shared across levels.
StudyResult run_study(const SweepConfig& cfg, const RngStream& rng, const StudyOptions& opts = {},
                      Exec exec = Exec::serial());

struct Summary {
    double mean = 0.0;
    double se = 0.0;
    Index count = 0;
};
Summary summarize(const std::vector<double>& v);

// ---- SNR sweep ----

struct SweepAggregate {
    double snr = 0.0;
    Method method = Method::vanilla;
    Summary test_mse;
    Summary theta_hat;
    Summary est_error;
    double admissible_fraction = 0.0;  // lassoed only: share of reps within 10% of the better baseline
};

struct SweepReport {
    std::vector<CellRecord> records;
    std::vector<SweepAggregate> aggregates;  // (snr, method) order
    const SweepAggregate& find(double snr, Method m) const;
};

SweepReport sweep_report(const StudyResult& study);
SweepReport snr_sweep(const SweepConfig& cfg, const RngStream& rng, Exec exec = Exec::serial());

// ---- bias-variance decomposition ----

struct DecompositionRow {
    double snr = 0.0;
    std::string method;
    double bias2 = 0.0;
    double variance = 0.0;
    double noise = 0.0;          // sigma^2
    double total = 0.0;          // bias2 + variance + noise
    double mse_signal = 0.0;     // direct MSE against the signal
    double mse_signal_se = 0.0;  // across replications
    double identity_gap = 0.0;   // |bias2 + variance - mse_signal|
};

/// R x M predictions on a fixed test set with known signal. Variance uses
/// divisor R so bias2 + variance equals the direct MSE up to rounding.
DecompositionRow decompose(const Matrix& predictions, const Vector& signal);

struct DecompositionReport {
    std::vector<DecompositionRow> rows;
};

DecompositionReport decomposition_report(const StudyResult& study);
DecompositionReport bias_variance_decomposition(const SweepConfig& cfg, const RngStream& rng,
                                                Exec exec = Exec::serial());

// ---- error-estimate accuracy ----

struct ScatterRow {
    double true_err = 0.0;
    double est_err = 0.0;
    std::string method;
    double snr = 0.0;
    Index rep = 0;
};

struct SignAgreement {
    double snr = 0.0;
    double rate = 0.0;
    Index agree = 0;
    Index total = 0;
};

struct ErrorAccuracyReport {
    std::vector<ScatterRow> scatter;               // methods vanilla, vanilla_heldout, post_selection
    std::vector<SignAgreement> agreement;          // per snr, vanilla OOB estimate vs post-selection CV
    std::vector<SignAgreement> agreement_heldout;  // per snr, vanilla held-out estimate vs post-selection CV
};

/// Fraction of pairs where sign(est_b - est_a) equals sign(true_b - true_a).
SignAgreement sign_agreement(const std::vector<double>& est_a, const std::vector<double>& est_b,
                             const std::vector<double>& true_a, const std::vector<double>& true_b);

ErrorAccuracyReport error_accuracy_report(const StudyResult& study);
ErrorAccuracyReport error_estimate_accuracy(const SweepConfig& cfg, const RngStream& rng, Exec exec = Exec::serial());

// ---- importance recovery ----

struct RecoveryRow {
    double snr = 0.0;
    std::string method;
    Summary recovery;
    Index excluded = 0;  // replications with undefined kappa
};

struct ImportanceReport {
    std::vector<RecoveryRow> rows;
};

/// Sum of kappa over the first k features.
double recovery_score(const Vector& kappa, Index k);

ImportanceReport importance_report(const StudyResult& study);
/// Requires cfg.dgp == fixed_support.
ImportanceReport importance_recovery(const SweepConfig& cfg, const RngStream& rng, Exec exec = Exec::serial(),
                                     bool absolute_weights = false);

// ---- report files ----

/// Lines written as '# key=value' before any CSV header.
struct Provenance {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string version;
};

void write_provenance(std::ostream& out, const Provenance& prov);
void write_sweep_csv(std::ostream& out, const SweepReport& r);
void write_sweep_summary_csv(std::ostream& out, const SweepReport& r);
void write_decomposition_csv(std::ostream& out, const DecompositionReport& r);
void write_scatter_csv(std::ostream& out, const ErrorAccuracyReport& r);
void write_agreement_csv(std::ostream& out, const ErrorAccuracyReport& r);
void write_importance_csv(std::ostream& out, const ImportanceReport& r);

}  // namespace lf::experiments
