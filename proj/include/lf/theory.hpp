#pragma once

#include <vector>

#include "lf/core.hpp"
#include "lf/parallel.hpp"

namespace lf::theory {

/// Bias eta, learner variance psi and pairwise covariance omega of J base
/// learners, plus the regression sample size N, noise sigma2 and signal phi.
struct TheoryParams {
    double eta = 0.0;
    double psi = 0.0;
    double omega = 0.0;
    Index J = 1;
    Index N = 0;
    double sigma2 = 1.0;
    double phi = 0.0;
    double mu = 0.0;
};

/// eta^2 + psi/J + (J-1)/J * omega
double term_a(const TheoryParams& p);
/// sigma2 / (N - J - 1); throws InvalidArgument unless N > J + 1.
double term_b(const TheoryParams& p);

double mse_mean_formula(const TheoryParams& p);
double mse_reg_formula(const TheoryParams& p);
double mse_ada_formula(const TheoryParams& p, double theta);

struct OptimalTheta {
    double theta = 0.5;
    bool degenerate = false;  // A = B = 0: every theta is optimal
};
OptimalTheta optimal_theta(const TheoryParams& p);

/// 2c / (c + 1) for 0 < c <= 1.
double blend_threshold(double c);

/// 1 - 1/r + sigma2 * r / (r - 1) for r = J / N > 1.
double min_norm_mse_limit(double r, double sigma2);

// ---- Monte Carlo oracles ----

struct Estimate {
    double mean = 0.0;
    double se = 0.0;
};

/// Learner outputs F ~ N(0, W) row-wise; y = Gamma_0 + F Gamma_{1:} + sigma eps.
struct GaussianOracleConfig {
    Eigen::MatrixXd W;
    Vector Gamma;  // length J + 1, Gamma(0) is the intercept
    Index N = 200;
    double sigma = 1.0;
    Index trials = 2000;
    Index test_points = 50;

    Index J() const { return static_cast<Index>(W.rows()); }
    void validate() const;
    /// Gamma_{1:}' W Gamma_{1:}
    double phi() const;
    /// Theory parameters implied by (W, Gamma): eta = -Gamma_0 and (psi, omega)
    /// the mean diagonal and off-diagonal of (I - 1 g')W(I - g 1'), g = Gamma_{1:},
    /// so that term_a equals the exact squared error of the plain mean.
    TheoryParams implied_params() const;
};

/// Identity W with Gamma = (gamma0, 1/J, ..., 1/J).
GaussianOracleConfig equal_weight_oracle(Index J, Index N, double sigma, double gamma0 = 0.0);

struct OraclePoint {
    double theta = 0.0;
    Estimate prediction_mse;  // E (y* - yhat)^2
    Estimate excess_mse;      // E (yhat - E[y*|F*])^2
};

struct OracleResult {
    std::vector<OraclePoint> points;  // one per theta, input order
    Estimate mean_prediction_mse;     // theta = 0 predictor
    Estimate reg_prediction_mse;      // theta = 1 predictor
    Index redrawn = 0;                // trials with a singular design
};

/// Every theta is scored on the same draws. Trial t uses rng.child(t).
OracleResult gaussian_oracle_mc(const GaussianOracleConfig& cfg, const std::vector<double>& thetas,
                                const RngStream& rng, Exec exec = Exec::serial());

/// Exact E (y* - yhat_theta)^2 for the oracle's Gaussian model with an
/// intercept-augmented OLS fit: sigma2 + (1-theta)^2 A + theta^2 B_exact with
/// B_exact = sigma2 * ((N+1)(N-2) / (N (N-J-2)) - 1). Needs N > J + 2.
double oracle_exact_prediction_mse(const GaussianOracleConfig& cfg, double theta);

struct MinNormConfig {
    Index J = 400;
    Index N = 200;
    double sigma2 = 1.0;
    Index trials = 500;
    Index test_points = 50;
    double rcond = 1e-10;
    void validate() const;
};

/// W = I, Gamma_j ~ N(0, 1/J) redrawn per trial, no intercept; minimum-norm
/// least squares via a truncated SVD pseudoinverse.
Estimate min_norm_mc(const MinNormConfig& cfg, const RngStream& rng, Exec exec = Exec::serial());

enum class LearnerSpec { correct, misspecified };

struct ScalingConfig {
    LearnerSpec mode = LearnerSpec::correct;
    std::vector<double> s_grid{0.5, 1.0, 2.0, 4.0, 8.0};
    double beta1 = 0.7;
    double beta2 = 0.7;
    Index N = 100;
    Index learners = 50;
    Index replications = 200;
    Index test_points = 50;
    void validate() const;
};

struct ScalingPoint {
    double s = 0.0;
    double sigma2 = 0.0;
    double psi = 0.0;
    double omega = 0.0;
    double mean_unique_rows = 0.0;
};

struct ScalingResult {
    std::vector<ScalingPoint> points;
    double psi_slope = 0.0;    // least-squares slope of log psi on log s
    double omega_slope = 0.0;
};

/// y = beta1 x1 + beta2 x2 + eps, x ~ N(0, I), sigma2 = phi / s with phi
/// fixed. Bootstrap OLS learners use (x1, x2) or only x1.
ScalingResult variance_scaling(const ScalingConfig& cfg, const RngStream& rng, Exec exec = Exec::serial());

/// Ordinary least-squares slope of y on x.
double ls_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace lf::theory
