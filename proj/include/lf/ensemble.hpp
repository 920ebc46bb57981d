#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lf/core.hpp"
#include "lf/forest.hpp"
#include "lf/lasso.hpp"
#include "lf/parallel.hpp"

namespace lf {

/// How the theta = 0 member of the grid is scored.
enum class ThetaZeroError {
    offset_cv,  // MSE of the pure offset on the same second-stage folds as every other theta
    oob,        // classic out-of-bag error of the forest on its own training half
};

struct FitConfig {
    Index n_trees = 200;
    TreeParams tree_params{0, 5, std::nullopt};  // mtry 0 resolves to max(1, p / 3)
    std::vector<double> theta_grid{0.0, 0.25, 0.5, 0.75, 1.0};
    Index cv_folds = 5;
    Index n_lambda = 100;
    double lambda_ratio = 1e-4;
    bool one_se_rule = false;
    LassoOptions solver;
    std::uint64_t seed = 0;
    bool standardize_response = true;
    bool penalize_intercept = true;
    bool cross_fitting = true;
    double split_ratio = 0.5;
    ThetaZeroError theta_zero_error = ThetaZeroError::offset_cv;

    void validate() const;
    TreeParams resolved_tree_params(Index p) const;
};

struct LassoedModel {
    Forest forest;
    double theta_hat = 0.0;
    double gamma0_hat = 0.0;
    Vector gamma_hat;
    double lambda_hat = 0.0;
    ResponseTransform transform;
    /// Estimated error per theta, on the original response scale, grid order.
    std::vector<std::pair<double, double>> cv_curve;
    std::vector<Index> first_half;   // forest rows
    std::vector<Index> second_half;  // selection rows
    std::vector<std::string> feature_names;
    std::optional<CvResult> cv;      // lambda selection at theta_hat, when theta_hat > 0

    Index n_features() const { return forest.n_features; }
};

struct ImportanceVector {
    Vector kappa;
    double theta_used = 0.0;
    bool has_negative = false;
};

/// Random disjoint halves: |first| = ceil(n * ratio) (ceil(n/2) by default).
std::pair<std::vector<Index>, std::vector<Index>> split_halves(Index n, RngStream& rng, double ratio = 0.5);

LassoedModel fit_post_selection(const Dataset& data, const FitConfig& config, Exec exec = Exec::serial());
LassoedModel fit_lassoed(const Dataset& data, const FitConfig& config, Exec exec = Exec::serial());

double predict_lassoed(const LassoedModel& model, std::span<const double> x);
Vector predict_lassoed(const LassoedModel& model, const Matrix& features, Exec exec = Exec::serial());
/// Predictions from an already evaluated n x J tree matrix.
Vector predict_from_matrix(const LassoedModel& model, const Matrix& tree_values);

ImportanceVector variable_importance(const LassoedModel& model, bool absolute_weights = false);

/// The three estimators sharing one forest, one split and one set of folds,
/// plus the error estimates each would use for model choice.
struct MethodFits {
    LassoedModel vanilla;         // theta fixed at 0
    LassoedModel post_selection;  // theta fixed at 1
    LassoedModel lassoed;         // theta chosen on the grid
    double vanilla_heldout_error = 0.0;   // forest-mean MSE over the selection folds, original scale
    double vanilla_oob_error = 0.0;       // OOB MSE on the forest half, original scale
    double post_selection_cv_error = 0.0; // CV MSE at the chosen lambda, original scale
};

/// Equivalent to calling the individual fits with the same config, but grows
/// the forest and solves each theta once.
MethodFits fit_all_methods(const Dataset& data, const FitConfig& config, Exec exec = Exec::serial());

}  // namespace lf
