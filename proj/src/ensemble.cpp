#include "lf/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <limits>
#include <string>
#include <tuple>

namespace lf {

namespace {
// Sub-stream labels of the fit seed.
constexpr std::uint64_t kSplitStream = 1;
constexpr std::uint64_t kForestStream = 2;
constexpr std::uint64_t kFoldStream = 3;
}  // namespace

void FitConfig::validate() const {
    if (n_trees < 1) throw InvalidArgument("fit config: n_trees must be >= 1");
    if (theta_grid.empty()) throw InvalidArgument("fit config: theta_grid is empty");
    for (Index k = 0; k < theta_grid.size(); ++k) {
        const double t = theta_grid[k];
        if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("fit config: theta values must lie in [0, 1]");
        if (k > 0 && !(theta_grid[k - 1] < t)) throw InvalidArgument("fit config: theta_grid must be strictly ascending");
    }
    if (cv_folds < 2) throw InvalidArgument("fit config: cv_folds must be >= 2");
    if (n_lambda < 2) throw InvalidArgument("fit config: n_lambda must be >= 2");
    if (!(lambda_ratio > 0.0 && lambda_ratio < 1.0)) throw InvalidArgument("fit config: lambda_ratio must lie in (0, 1)");
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw InvalidArgument("fit config: split_ratio must lie in (0, 1)");
}

TreeParams FitConfig::resolved_tree_params(Index p) const {
    TreeParams t = tree_params;
    if (t.mtry == 0) t.mtry = TreeParams::defaults(p).mtry;
    return t;
}

std::pair<std::vector<Index>, std::vector<Index>> split_halves(Index n, RngStream& rng, double ratio) {
    if (n < 4) throw InvalidArgument("split_halves: need n >= 4");
    if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidArgument("split_halves: ratio must lie in (0, 1)");
    std::vector<Index> perm(n);
    std::iota(perm.begin(), perm.end(), Index{0});
    for (Index i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
    auto first_size = static_cast<Index>(std::ceil(static_cast<double>(n) * ratio));
    first_size = std::clamp<Index>(first_size, 1, n - 1);
    std::vector<Index> a(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(first_size));
    std::vector<Index> b(perm.begin() + static_cast<std::ptrdiff_t>(first_size), perm.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return {std::move(a), std::move(b)};
}

namespace {

/// Everything shared by the theta fits: transformed data, the forest, the
/// second-stage matrix with its offset, and the fold assignment.
struct Stage {
    ResponseTransform transform;
    std::vector<Index> first, second;
    Forest forest;
    Dataset forest_data;
    Matrix tree_values;  // second-stage rows x J
    Vector offset;
    Vector target;
    std::vector<Index> folds;
    double oob_error = 0.0;  // standardized scale
};

Stage prepare(const Dataset& raw, const FitConfig& cfg, Exec exec) {
    cfg.validate();
    raw.validate();
    Stage st;
    Dataset data;
    if (cfg.standardize_response) {
        auto [d, t] = standardize_response(raw);
        data = std::move(d);
        st.transform = t;
    } else {
        data = raw;
    }
    const RngStream base(cfg.seed, 0);
    const TreeParams params = cfg.resolved_tree_params(data.cols());

    TreePredictionMatrix second;
    if (cfg.cross_fitting) {
        RngStream split_rng = base.child(kSplitStream);
        std::tie(st.first, st.second) = split_halves(data.rows(), split_rng, cfg.split_ratio);
        st.forest_data = data.subset(st.first);
        st.forest = fit_forest(st.forest_data, cfg.n_trees, params, base.child(kForestStream), exec);
        const Dataset d2 = data.subset(st.second);
        second = prediction_matrix(st.forest, d2.features, RowOrigin::held_out, exec);
        st.offset = second.row_means();
        st.target = d2.response;
    } else {
        st.first.resize(data.rows());
        std::iota(st.first.begin(), st.first.end(), Index{0});
        st.second = st.first;
        st.forest_data = data;
        st.forest = fit_forest(data, cfg.n_trees, params, base.child(kForestStream), exec);
        second = prediction_matrix(st.forest, data.features, RowOrigin::training, exec);
        // Offset restricted to out-of-bag trees; rows in every bag fall back to all trees.
        st.offset.resize(second.values.rows());
        for (Eigen::Index i = 0; i < second.values.rows(); ++i) {
            double s = 0.0, all = 0.0;
            Index k = 0;
            for (Eigen::Index j = 0; j < second.values.cols(); ++j) {
                all += second.values(i, j);
                if (second.oob_mask(i, j)) {
                    s += second.values(i, j);
                    ++k;
                }
            }
            st.offset(i) = k > 0 ? s / static_cast<double>(k) : all / static_cast<double>(second.values.cols());
        }
        st.target = data.response;
    }
    st.tree_values = std::move(second.values);
    if (st.target.size() < static_cast<Eigen::Index>(cfg.cv_folds))
        throw InvalidArgument("fit: second-stage sample smaller than cv_folds");
    RngStream fold_rng = base.child(kFoldStream);
    st.folds = assign_folds(static_cast<Index>(st.target.size()), cfg.cv_folds, fold_rng);

    const auto oob = oob_predictions(st.forest, st.forest_data, exec);
    double sse = 0.0;
    Index covered = 0;
    for (Index i = 0; i < oob.values.size(); ++i) {
        if (!oob.values[i]) continue;
        const double e = st.forest_data.response(static_cast<Eigen::Index>(i)) - *oob.values[i];
        sse += e * e;
        ++covered;
    }
    st.oob_error = covered ? sse / static_cast<double>(covered) : std::numeric_limits<double>::infinity();
    return st;
}

struct ThetaFit {
    double theta = 0.0;
    double error = 0.0;  // standardized scale
    LassoSolution solution;
    std::optional<CvResult> cv;
};

CvOptions cv_options(const FitConfig& cfg) {
    CvOptions o;
    o.n_lambda = cfg.n_lambda;
    o.lambda_ratio = cfg.lambda_ratio;
    o.one_se_rule = cfg.one_se_rule;
    o.solver = cfg.solver;
    return o;
}

double offset_fold_error(const Stage& st) {
    const Index k = *std::max_element(st.folds.begin(), st.folds.end()) + 1;
    std::vector<double> sse(k, 0.0);
    std::vector<Index> count(k, 0);
    for (Index i = 0; i < st.folds.size(); ++i) {
        const double e = st.target(static_cast<Eigen::Index>(i)) - st.offset(static_cast<Eigen::Index>(i));
        sse[st.folds[i]] += e * e;
        ++count[st.folds[i]];
    }
    double total = 0.0;
    for (Index f = 0; f < k; ++f) total += sse[f] / static_cast<double>(count[f]);
    return total / static_cast<double>(k);
}

ThetaFit fit_theta(const Stage& st, double theta, const FitConfig& cfg, Exec exec) {
    ThetaFit fit;
    fit.theta = theta;
    const auto J = static_cast<Eigen::Index>(st.forest.size());
    if (theta == 0.0) {
        fit.error = cfg.theta_zero_error == ThetaZeroError::oob ? st.oob_error : offset_fold_error(st);
        fit.solution.gamma = Vector::Zero(J);
        fit.solution.converged = true;
        return fit;
    }
    const LassoProblem problem =
        LassoProblem::from_columns(st.tree_values, st.target, theta, &st.offset, 1.0 - theta, cfg.penalize_intercept);
    CvResult cv = cv_select_lambda(problem, st.folds, cv_options(cfg), exec);
    fit.error = cv.cv_errors[cv.chosen_index];
    // Refit on the whole second stage, warm-started down the path to the chosen lambda.
    const std::vector<double> head(cv.lambdas.begin(), cv.lambdas.begin() + static_cast<std::ptrdiff_t>(cv.chosen_index) + 1);
    fit.solution = solve_path(problem, head, cfg.solver).back();
    fit.cv = std::move(cv);
    return fit;
}

LassoedModel to_model(const Stage& st, const ThetaFit& chosen, std::vector<std::pair<double, double>> curve,
                      const Dataset& raw) {
    LassoedModel m;
    m.forest = st.forest;
    m.theta_hat = chosen.theta;
    // The solver's intercept absorbs the theta factor.
    m.gamma0_hat = chosen.theta > 0.0 ? chosen.solution.gamma0 / chosen.theta : 0.0;
    m.gamma_hat = chosen.solution.gamma;
    m.lambda_hat = chosen.theta > 0.0 ? chosen.solution.lambda : 0.0;
    m.transform = st.transform;
    m.cv_curve = std::move(curve);
    m.first_half = st.first;
    m.second_half = st.second;
    m.feature_names = raw.feature_names;
    m.cv = chosen.cv;
    return m;
}

double to_original_scale(const Stage& st, double err) { return err * st.transform.scale * st.transform.scale; }

}  // namespace

LassoedModel fit_post_selection(const Dataset& data, const FitConfig& config, Exec exec) {
    const Stage st = prepare(data, config, exec);
    const ThetaFit fit = fit_theta(st, 1.0, config, exec);
    return to_model(st, fit, {{1.0, to_original_scale(st, fit.error)}}, data);
}

namespace {

std::pair<LassoedModel, std::vector<ThetaFit>> fit_grid(const Stage& st, const Dataset& data, const FitConfig& cfg,
                                                         Exec exec) {
    std::vector<ThetaFit> fits;
    fits.reserve(cfg.theta_grid.size());
    for (double theta : cfg.theta_grid) fits.push_back(fit_theta(st, theta, cfg, exec));
    Index best = 0;
    for (Index k = 1; k < fits.size(); ++k)
        if (fits[k].error < fits[best].error) best = k;
    std::vector<std::pair<double, double>> curve;
    for (const auto& f : fits) curve.emplace_back(f.theta, to_original_scale(st, f.error));
    LassoedModel m = to_model(st, fits[best], std::move(curve), data);
    return {std::move(m), std::move(fits)};
}

}  // namespace

LassoedModel fit_lassoed(const Dataset& data, const FitConfig& config, Exec exec) {
    const Stage st = prepare(data, config, exec);
    return fit_grid(st, data, config, exec).first;
}

MethodFits fit_all_methods(const Dataset& data, const FitConfig& config, Exec exec) {
    const Stage st = prepare(data, config, exec);
    auto [lassoed, fits] = fit_grid(st, data, config, exec);
    MethodFits out;

    const auto find = [&](double theta) -> const ThetaFit* {
        for (const auto& f : fits)
            if (f.theta == theta) return &f;
        return nullptr;
    };
    ThetaFit zero_fit, one_fit;
    if (const auto* z = find(0.0)) zero_fit = *z; else zero_fit = fit_theta(st, 0.0, config, exec);
    if (const auto* o = find(1.0)) one_fit = *o; else one_fit = fit_theta(st, 1.0, config, exec);

    out.vanilla = to_model(st, zero_fit, {{0.0, to_original_scale(st, zero_fit.error)}}, data);
    out.post_selection = to_model(st, one_fit, {{1.0, to_original_scale(st, one_fit.error)}}, data);
    out.lassoed = std::move(lassoed);
    out.vanilla_heldout_error = to_original_scale(st, offset_fold_error(st));
    out.vanilla_oob_error = to_original_scale(st, st.oob_error);
    out.post_selection_cv_error = to_original_scale(st, one_fit.error);
    return out;
}

namespace {

double combine(const LassoedModel& m, std::span<const double> tree_preds) {
    const double J = static_cast<double>(tree_preds.size());
    double sum = 0.0;
    for (double v : tree_preds) sum += v;
    const double mean = sum / J;
    double z;
    if (m.theta_hat == 0.0) {
        z = mean;
    } else {
        double lin = m.gamma0_hat;
        for (Index j = 0; j < tree_preds.size(); ++j) lin += tree_preds[j] * m.gamma_hat(static_cast<Eigen::Index>(j));
        z = m.theta_hat * lin + (1.0 - m.theta_hat) * mean;
    }
    return m.transform.invert(z);
}

}  // namespace

double predict_lassoed(const LassoedModel& model, std::span<const double> x) {
    if (x.size() != model.n_features())
        throw InvalidArgument("predict_lassoed: expected " + std::to_string(model.n_features()) + " features, got " +
                              std::to_string(x.size()));
    std::vector<double> preds(model.forest.size());
    for (Index j = 0; j < preds.size(); ++j) preds[j] = model.forest.trees[j].predict(x);
    return combine(model, preds);
}

Vector predict_from_matrix(const LassoedModel& model, const Matrix& tree_values) {
    if (static_cast<Index>(tree_values.cols()) != model.forest.size())
        throw InvalidArgument("predict_from_matrix: column count differs from tree count");
    Vector out(tree_values.rows());
    for (Eigen::Index i = 0; i < tree_values.rows(); ++i)
        out(i) = combine(model, {tree_values.row(i).data(), static_cast<Index>(tree_values.cols())});
    return out;
}

Vector predict_lassoed(const LassoedModel& model, const Matrix& features, Exec exec) {
    if (static_cast<Index>(features.cols()) != model.n_features())
        throw InvalidArgument("predict_lassoed: expected " + std::to_string(model.n_features()) + " features, got " +
                              std::to_string(features.cols()));
    const auto m = prediction_matrix(model.forest, features, RowOrigin::held_out, exec);
    return predict_from_matrix(model, m.values);
}

ImportanceVector variable_importance(const LassoedModel& model, bool absolute_weights) {
    const Eigen::MatrixXi counts = split_counts(model.forest);
    const Eigen::MatrixXd c = counts.cast<double>();
    const double total = c.sum();
    if (total == 0.0)
        throw DegenerateError("variable_importance: forest has no splits (every tree is a single leaf)");
    ImportanceVector out;
    out.theta_used = model.theta_hat;
    out.kappa = (1.0 - model.theta_hat) * (c.rowwise().sum() / total);
    if (model.theta_hat > 0.0) {
        Vector w = model.gamma_hat;
        if (absolute_weights) w = w.cwiseAbs();
        const Vector weighted = c * w;
        const double denom = weighted.sum();
        const double magnitude = (c * model.gamma_hat.cwiseAbs()).sum();
        if (magnitude == 0.0 || std::abs(denom) <= 1e-12 * magnitude)
            throw DegenerateError(
                "variable_importance: Lasso-weighted split counts sum to zero; no tree carries weight"
                " (try absolute coefficient weights if signed weights cancel)");
        out.kappa += model.theta_hat * (weighted / denom);
    }
    out.has_negative = (out.kappa.array() < 0.0).any();
    return out;
}

}  // namespace lf
