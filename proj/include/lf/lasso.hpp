#pragma once

#include <optional>
#include <vector>

#include "lf/core.hpp"
#include "lf/parallel.hpp"

namespace lf {

using ColMatrix = Eigen::MatrixXd;

/// Penalized least squares
///
///     (1/N) || target - offset - design * coef ||^2 + lambda * sum_j w_j |coef_j|
///
/// where design column 0 is the intercept (all ones) and columns 1..J are the
/// learner predictions. The penalty weight of a learner column is its
/// population standard deviation, which is the same problem as running the
/// descent on standardized columns and reporting coefficients on the original
/// scale. The intercept weight is 1 when penalized, 0 otherwise.
struct LassoProblem {
    ColMatrix design;
    Vector target;
    Vector offset;
    bool penalize_intercept = true;

    Index rows() const { return static_cast<Index>(design.rows()); }
    /// Number of learner columns J (design has J + 1 columns).
    Index learners() const { return static_cast<Index>(design.cols()) - 1; }
    void validate() const;

    /// design = [1, scale * columns], offset = offset_scale * offset_source.
    static LassoProblem from_columns(const Matrix& columns, const Vector& target, double scale = 1.0,
                                     const Vector* offset_source = nullptr, double offset_scale = 0.0,
                                     bool penalize_intercept = true);
    LassoProblem subset(const std::vector<Index>& rows) const;
};

struct LassoOptions {
    double tol = 1e-7;           // max standardized coefficient change per sweep
    Index max_iter = 100000;     // sweeps
    double kkt_tol = 1e-5;
};

struct LassoSolution {
    double gamma0 = 0.0;
    Vector gamma;
    double lambda = 0.0;
    double objective = 0.0;
    Index n_nonzero = 0;
    bool converged = false;
    Index iterations = 0;
    double kkt_residual = 0.0;

    /// gamma0 + row . gamma for one design row without the intercept column.
    double predict_linear(const double* learner_row, Index stride = 1) const;
};

struct CvResult {
    std::vector<double> lambdas;
    std::vector<double> cv_errors;
    std::vector<double> cv_se;
    double chosen_lambda = 0.0;
    Index chosen_index = 0;
    std::vector<Index> fold_assignment;
};

/// Per-column penalty weights as used by the solver (index 0 = intercept).
Vector penalty_weights(const LassoProblem& problem);

double lambda_max(const LassoProblem& problem);

LassoSolution coordinate_descent(const LassoProblem& problem, double lambda, const LassoOptions& opts = {},
                                 const LassoSolution* warm_start = nullptr);

/// Largest violation of the subgradient optimality conditions at `sol`.
double kkt_residual(const LassoProblem& problem, const LassoSolution& sol);
double lasso_objective(const LassoProblem& problem, const LassoSolution& sol);

/// Log-spaced from lambda_max down to ratio * lambda_max; {0} when lambda_max is 0.
std::vector<double> lambda_path(const LassoProblem& problem, Index n_lambda = 100, double ratio = 1e-4);

/// Warm-started solutions along a descending lambda sequence.
std::vector<LassoSolution> solve_path(const LassoProblem& problem, const std::vector<double>& lambdas,
                                      const LassoOptions& opts = {});

struct CvOptions {
    Index n_lambda = 100;
    double lambda_ratio = 1e-4;
    bool one_se_rule = false;
    LassoOptions solver;
};

/// Random near-equal partition of [0, n) into k folds.
std::vector<Index> assign_folds(Index n, Index k, RngStream& rng);

CvResult cv_select_lambda(const LassoProblem& problem, Index k, RngStream& rng, const CvOptions& opts = {},
                          Exec exec = Exec::serial());
/// Same as above with a caller-supplied fold assignment (values in [0, k)).
CvResult cv_select_lambda(const LassoProblem& problem, const std::vector<Index>& folds, const CvOptions& opts = {},
                          Exec exec = Exec::serial());

}  // namespace lf
