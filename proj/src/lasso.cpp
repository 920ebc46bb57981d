#include "lf/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace lf {

void LassoProblem::validate() const {
    if (design.cols() < 1) throw InvalidArgument("lasso: design needs an intercept column");
    if (design.rows() != target.size() || design.rows() != offset.size())
        throw InvalidArgument("lasso: design, target and offset row counts differ");
    if (design.rows() < 1) throw InvalidArgument("lasso: empty problem");
    if (!design.allFinite() || !target.allFinite() || !offset.allFinite())
        throw InvalidArgument("lasso: non-finite entry");
    if ((design.col(0).array() != 1.0).any()) throw InvalidArgument("lasso: design column 0 must be all ones");
}

LassoProblem LassoProblem::from_columns(const Matrix& columns, const Vector& target, double scale,
                                        const Vector* offset_source, double offset_scale, bool penalize_intercept) {
    LassoProblem p;
    p.design.resize(columns.rows(), columns.cols() + 1);
    p.design.col(0).setOnes();
    p.design.rightCols(columns.cols()) = scale * columns;
    p.target = target;
    if (offset_source)
        p.offset = offset_scale * *offset_source;
    else
        p.offset = Vector::Zero(target.size());
    p.penalize_intercept = penalize_intercept;
    return p;
}

LassoProblem LassoProblem::subset(const std::vector<Index>& rows) const {
    LassoProblem p;
    const auto n = static_cast<Eigen::Index>(rows.size());
    p.design.resize(n, design.cols());
    p.target.resize(n);
    p.offset.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto i = static_cast<Eigen::Index>(rows[static_cast<Index>(k)]);
        p.design.row(k) = design.row(i);
        p.target(k) = target(i);
        p.offset(k) = offset(i);
    }
    p.penalize_intercept = penalize_intercept;
    return p;
}

double LassoSolution::predict_linear(const double* learner_row, Index stride) const {
    double s = gamma0;
    for (Eigen::Index j = 0; j < gamma.size(); ++j) s += learner_row[static_cast<Index>(j) * stride] * gamma(j);
    return s;
}

Vector penalty_weights(const LassoProblem& problem) {
    const Eigen::Index cols = problem.design.cols();
    Vector w(cols);
    w(0) = problem.penalize_intercept ? 1.0 : 0.0;
    const double n = static_cast<double>(problem.rows());
    for (Eigen::Index j = 1; j < cols; ++j) {
        const auto c = problem.design.col(j);
        const double mean = c.sum() / n;
        const double var = (c.array() - mean).square().sum() / n;
        const double sd = std::sqrt(var);
        const double size = std::max(1.0, c.cwiseAbs().maxCoeff());
        // Columns constant to rounding carry no information beyond the intercept.
        w(j) = sd > 1e-12 * size ? sd : 0.0;
    }
    return w;
}

namespace {

bool is_skipped(const Vector& w, Eigen::Index j) { return j > 0 && w(j) == 0.0; }

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

double sign(double v) { return (v > 0.0) - (v < 0.0); }

Vector coefficients(const LassoSolution& s) {
    Vector c(s.gamma.size() + 1);
    c(0) = s.gamma0;
    c.tail(s.gamma.size()) = s.gamma;
    return c;
}

Vector residual(const LassoProblem& p, const Vector& coef) { return p.target - p.offset - p.design * coef; }

double kkt_from_residual(const LassoProblem& p, const Vector& w, const Vector& coef, const Vector& r, double lambda) {
    const double n = static_cast<double>(p.rows());
    double worst = 0.0;
    for (Eigen::Index j = 0; j < p.design.cols(); ++j) {
        if (is_skipped(w, j)) continue;
        const double g = 2.0 / n * p.design.col(j).dot(r);
        const double t = lambda * w(j);
        double v;
        if (coef(j) != 0.0)
            v = std::abs(g - t * sign(coef(j)));
        else
            v = std::max(0.0, std::abs(g) - t);
        worst = std::max(worst, v);
    }
    return worst;
}

}  // namespace

double kkt_residual(const LassoProblem& problem, const LassoSolution& sol) {
    const Vector w = penalty_weights(problem);
    const Vector c = coefficients(sol);
    return kkt_from_residual(problem, w, c, residual(problem, c), sol.lambda);
}

double lasso_objective(const LassoProblem& problem, const LassoSolution& sol) {
    const Vector w = penalty_weights(problem);
    const Vector c = coefficients(sol);
    const Vector r = residual(problem, c);
    return r.squaredNorm() / static_cast<double>(problem.rows()) + sol.lambda * (w.array() * c.array().abs()).sum();
}

double lambda_max(const LassoProblem& problem) {
    problem.validate();
    const Vector w = penalty_weights(problem);
    Vector r0 = problem.target - problem.offset;
    if (!problem.penalize_intercept) r0.array() -= r0.mean();
    const double n = static_cast<double>(problem.rows());
    double lmax = 0.0;
    for (Eigen::Index j = 0; j < problem.design.cols(); ++j) {
        if (w(j) == 0.0) continue;
        lmax = std::max(lmax, std::abs(2.0 / n * problem.design.col(j).dot(r0)) / w(j));
    }
    // Round-off in an exactly-zero residual should not create a spurious path.
    const double scale = std::max(1.0, (problem.target - problem.offset).cwiseAbs().maxCoeff());
    return lmax > 1e-14 * scale ? lmax : 0.0;
}

namespace {

class Descent {
  public:
    Descent(const LassoProblem& p, double lambda, const LassoOptions& opts)
        : p_(p), lambda_(lambda), opts_(opts), w_(penalty_weights(p)) {
        const double n = static_cast<double>(p.rows());
        curvature_.resize(p.design.cols());
        for (Eigen::Index j = 0; j < p.design.cols(); ++j) curvature_(j) = 2.0 / n * p.design.col(j).squaredNorm();
        // Change is measured on the standardized coefficient scale.
        change_scale_ = w_;
        change_scale_(0) = 1.0;
    }

    LassoSolution run(const LassoSolution* warm) {
        const Eigen::Index cols = p_.design.cols();
        coef_ = Vector::Zero(cols);
        if (warm && warm->gamma.size() == cols - 1) {
            coef_(0) = warm->gamma0;
            coef_.tail(cols - 1) = warm->gamma;
            for (Eigen::Index j = 1; j < cols; ++j)
                if (is_skipped(w_, j)) coef_(j) = 0.0;
        }
        r_ = residual(p_, coef_);

        Index sweeps = 0;
        bool converged = false;
        std::vector<Eigen::Index> all(static_cast<Index>(cols));
        std::iota(all.begin(), all.end(), Eigen::Index{0});
        while (sweeps < opts_.max_iter) {
            const double full_change = sweep(all);
            ++sweeps;
            if (full_change < opts_.tol) {
                r_ = residual(p_, coef_);
                if (kkt_from_residual(p_, w_, coef_, r_, lambda_) <= opts_.kkt_tol) {
                    converged = true;
                    break;
                }
                continue;
            }
            std::vector<Eigen::Index> active;
            for (Eigen::Index j = 0; j < cols; ++j)
                if (coef_(j) != 0.0) active.push_back(j);
            Index stalled = 0;
            while (sweeps < opts_.max_iter) {
                const double change = sweep(active);
                ++sweeps;
                if (change < opts_.tol) break;
                // Slow linear convergence on an ill-conditioned active set:
                // jump toward the fixed-sign stationary point instead.
                if (++stalled % kPolishEvery == 0) polish(active);
            }
            r_ = residual(p_, coef_);
        }

        LassoSolution s;
        r_ = residual(p_, coef_);
        s.gamma0 = coef_(0);
        s.gamma = coef_.tail(cols - 1);
        s.lambda = lambda_;
        s.objective = r_.squaredNorm() / static_cast<double>(p_.rows()) + lambda_ * (w_.array() * coef_.array().abs()).sum();
        s.n_nonzero = static_cast<Index>((s.gamma.array() != 0.0).count()) +
                      ((p_.penalize_intercept && s.gamma0 != 0.0) ? 1 : 0);
        s.iterations = sweeps;
        s.kkt_residual = kkt_from_residual(p_, w_, coef_, r_, lambda_);
        s.converged = converged;
        return s;
    }

  private:
    static constexpr Index kPolishEvery = 10;

    /// With the signs of the active coefficients frozen the objective is a
    /// quadratic whose minimizer solves G c = X'(t - o) - (N lambda / 2) w s.
    /// Moves toward it, stopping where the first coefficient would change
    /// sign, so the objective cannot increase.
    void polish(const std::vector<Eigen::Index>& active) {
        std::vector<Eigen::Index> a;
        for (Eigen::Index j : active)
            if (!is_skipped(w_, j) && curvature_(j) > 0.0 && (coef_(j) != 0.0 || w_(j) == 0.0)) a.push_back(j);
        if (a.empty()) return;
        if (a.size() > p_.rows() && !drop_dependent(a)) return;
        const auto k = static_cast<Eigen::Index>(a.size());
        const double n = static_cast<double>(p_.rows());
        Eigen::MatrixXd xa(p_.rows(), k);
        Vector cur(k), rhs(k);
        for (Eigen::Index i = 0; i < k; ++i) {
            xa.col(i) = p_.design.col(a[static_cast<Index>(i)]);
            cur(i) = coef_(a[static_cast<Index>(i)]);
        }
        const Vector target = r_ + xa * cur;  // target - offset - contribution of the other columns
        const Eigen::MatrixXd g = xa.transpose() * xa;
        for (Eigen::Index i = 0; i < k; ++i) {
            const Eigen::Index j = a[static_cast<Index>(i)];
            const double s = cur(i) > 0.0 ? 1.0 : cur(i) < 0.0 ? -1.0 : 0.0;
            rhs(i) = xa.col(i).dot(target) - 0.5 * n * lambda_ * w_(j) * s;
        }
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(g);
        if (ldlt.info() != Eigen::Success) return;
        const Vector next = ldlt.solve(rhs);
        if (!next.allFinite() || (g * next - rhs).norm() > 1e-6 * std::max(1.0, rhs.norm())) return;

        double step = 1.0;
        Eigen::Index hit = -1;
        for (Eigen::Index i = 0; i < k; ++i) {
            if (w_(a[static_cast<Index>(i)]) == 0.0) continue;
            if (cur(i) * next(i) < 0.0) {
                const double t = cur(i) / (cur(i) - next(i));
                if (t < step) step = t, hit = i;
            }
        }
        const Vector moved = cur + step * (next - cur);
        const Vector r_new = target - xa * moved;
        double pen_old = 0.0, pen_new = 0.0;
        for (Eigen::Index i = 0; i < k; ++i) {
            const double w = w_(a[static_cast<Index>(i)]);
            pen_old += w * std::abs(cur(i));
            pen_new += w * std::abs(i == hit ? 0.0 : moved(i));
        }
        const double before = r_.squaredNorm() / n + lambda_ * pen_old;
        const double after = r_new.squaredNorm() / n + lambda_ * pen_new;
        if (!(after < before)) return;
        for (Eigen::Index i = 0; i < k; ++i) coef_(a[static_cast<Index>(i)]) = i == hit ? 0.0 : moved(i);
        r_ = residual(p_, coef_);
    }

    /// More active columns than rows: some direction d leaves the fit
    /// unchanged, so move along it (lowering the penalty) until the first
    /// coefficient reaches zero. Returns false if no coefficient could be dropped.
    bool drop_dependent(std::vector<Eigen::Index>& a) {
        while (a.size() > p_.rows()) {
            const auto k = static_cast<Eigen::Index>(a.size());
            Eigen::MatrixXd xa(p_.rows(), k);
            for (Eigen::Index i = 0; i < k; ++i) xa.col(i) = p_.design.col(a[static_cast<Index>(i)]);
            const Eigen::FullPivLU<Eigen::MatrixXd> lu(xa);
            Vector d = lu.kernel().col(0);
            double slope = 0.0;
            for (Eigen::Index i = 0; i < k; ++i) {
                const Eigen::Index j = a[static_cast<Index>(i)];
                slope += w_(j) * (coef_(j) > 0.0 ? 1.0 : -1.0) * d(i);
            }
            if (slope > 0.0) d = -d;
            double step = std::numeric_limits<double>::infinity();
            Eigen::Index hit = -1;
            for (Eigen::Index i = 0; i < k; ++i) {
                const double c = coef_(a[static_cast<Index>(i)]);
                if (w_(a[static_cast<Index>(i)]) > 0.0 && c * d(i) < 0.0 && -c / d(i) < step) step = -c / d(i), hit = i;
            }
            if (hit < 0) return false;
            const double before = lasso_value();
            const Vector saved = coef_;
            for (Eigen::Index i = 0; i < k; ++i) coef_(a[static_cast<Index>(i)]) += step * d(i);
            coef_(a[static_cast<Index>(hit)]) = 0.0;
            r_ = residual(p_, coef_);
            if (!(lasso_value() <= before)) {
                coef_ = saved;
                r_ = residual(p_, coef_);
                return false;
            }
            a.erase(a.begin() + hit);
        }
        return true;
    }

    double lasso_value() const {
        return r_.squaredNorm() / static_cast<double>(p_.rows()) + lambda_ * (w_.array() * coef_.array().abs()).sum();
    }

    double sweep(const std::vector<Eigen::Index>& cols) {
        const double n = static_cast<double>(p_.rows());
        double max_change = 0.0;
        for (Eigen::Index j : cols) {
            if (is_skipped(w_, j) || curvature_(j) == 0.0) continue;
            const auto x = p_.design.col(j);
            const double old = coef_(j);
            const double z = 2.0 / n * x.dot(r_) + curvature_(j) * old;
            const double updated = soft_threshold(z, lambda_ * w_(j)) / curvature_(j);
            const double delta = updated - old;
            if (delta != 0.0) {
                r_.noalias() -= delta * x;
                coef_(j) = updated;
                max_change = std::max(max_change, std::abs(delta) * change_scale_(j));
            }
        }
        return max_change;
    }

    const LassoProblem& p_;
    double lambda_;
    LassoOptions opts_;
    Vector w_;
    Vector curvature_;
    Vector change_scale_;
    Vector coef_;
    Vector r_;
};

}  // namespace

LassoSolution coordinate_descent(const LassoProblem& problem, double lambda, const LassoOptions& opts,
                                 const LassoSolution* warm_start) {
    problem.validate();
    if (!(lambda >= 0.0)) throw InvalidArgument("coordinate_descent: lambda must be >= 0");
    if (!(opts.tol > 0.0)) throw InvalidArgument("coordinate_descent: tol must be > 0");
    Descent d(problem, lambda, opts);
    return d.run(warm_start);
}

std::vector<double> lambda_path(const LassoProblem& problem, Index n_lambda, double ratio) {
    if (n_lambda < 2) throw InvalidArgument("lambda_path: n_lambda must be >= 2");
    if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidArgument("lambda_path: ratio must lie in (0, 1)");
    const double lmax = lambda_max(problem);
    if (lmax == 0.0) return {0.0};
    std::vector<double> path(n_lambda);
    const double step = std::log(ratio) / static_cast<double>(n_lambda - 1);
    path.front() = lmax;
    for (Index k = 1; k + 1 < n_lambda; ++k) path[k] = lmax * std::exp(step * static_cast<double>(k));
    path.back() = lmax * ratio;
    return path;
}

std::vector<LassoSolution> solve_path(const LassoProblem& problem, const std::vector<double>& lambdas,
                                      const LassoOptions& opts) {
    std::vector<LassoSolution> out;
    out.reserve(lambdas.size());
    for (double l : lambdas) out.push_back(coordinate_descent(problem, l, opts, out.empty() ? nullptr : &out.back()));
    return out;
}

std::vector<Index> assign_folds(Index n, Index k, RngStream& rng) {
    if (k < 2) throw InvalidArgument("assign_folds: need k >= 2");
    if (n < k) throw InvalidArgument("assign_folds: need n >= k so every fold has a row");
    std::vector<Index> perm(n);
    std::iota(perm.begin(), perm.end(), Index{0});
    for (Index i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
    std::vector<Index> folds(n);
    for (Index pos = 0; pos < n; ++pos) folds[perm[pos]] = pos % k;
    return folds;
}

CvResult cv_select_lambda(const LassoProblem& problem, Index k, RngStream& rng, const CvOptions& opts, Exec exec) {
    if (k < 2) throw InvalidArgument("cv_select_lambda: need k >= 2");
    if (problem.rows() < k) throw InvalidArgument("cv_select_lambda: fewer rows than folds");
    return cv_select_lambda(problem, assign_folds(problem.rows(), k, rng), opts, exec);
}

CvResult cv_select_lambda(const LassoProblem& problem, const std::vector<Index>& folds, const CvOptions& opts,
                          Exec exec) {
    problem.validate();
    if (folds.size() != problem.rows()) throw InvalidArgument("cv_select_lambda: fold vector length mismatch");
    const Index k = folds.empty() ? 0 : *std::max_element(folds.begin(), folds.end()) + 1;
    if (k < 2) throw InvalidArgument("cv_select_lambda: need at least two folds");
    std::vector<std::vector<Index>> held(k), train(k);
    for (Index i = 0; i < folds.size(); ++i) {
        for (Index f = 0; f < k; ++f) (folds[i] == f ? held[f] : train[f]).push_back(i);
    }
    for (Index f = 0; f < k; ++f)
        if (held[f].empty() || train[f].empty()) throw InvalidArgument("cv_select_lambda: a fold has no rows");

    CvResult cv;
    cv.lambdas = lambda_path(problem, opts.n_lambda, opts.lambda_ratio);
    cv.fold_assignment = folds;
    const Index L = cv.lambdas.size();

    std::vector<std::vector<double>> fold_mse(k, std::vector<double>(L, 0.0));
    parallel_for(k, exec, [&](Index f) {
        const LassoProblem sub = problem.subset(train[f]);
        const auto path = solve_path(sub, cv.lambdas, opts.solver);
        for (Index l = 0; l < L; ++l) {
            double sse = 0.0;
            for (Index i : held[f]) {
                const auto r = static_cast<Eigen::Index>(i);
                double pred = problem.offset(r) + path[l].gamma0;
                for (Eigen::Index j = 0; j < path[l].gamma.size(); ++j) pred += problem.design(r, j + 1) * path[l].gamma(j);
                const double e = problem.target(r) - pred;
                sse += e * e;
            }
            fold_mse[f][l] = sse / static_cast<double>(held[f].size());
        }
    });

    cv.cv_errors.assign(L, 0.0);
    cv.cv_se.assign(L, 0.0);
    for (Index l = 0; l < L; ++l) {
        std::vector<double> v(k);
        for (Index f = 0; f < k; ++f) v[f] = fold_mse[f][l];
        cv.cv_errors[l] = sample_mean(v);
        cv.cv_se[l] = sample_sd(v) / std::sqrt(static_cast<double>(k));
    }
    // Ties resolve to the larger lambda, which comes first on the descending path.
    Index best = 0;
    for (Index l = 1; l < L; ++l)
        if (cv.cv_errors[l] < cv.cv_errors[best]) best = l;
    if (opts.one_se_rule) {
        const double limit = cv.cv_errors[best] + cv.cv_se[best];
        for (Index l = 0; l <= best; ++l) {
            if (cv.cv_errors[l] <= limit) {
                best = l;
                break;
            }
        }
    }
    cv.chosen_index = best;
    cv.chosen_lambda = cv.lambdas[best];
    return cv;
}

}  // namespace lf
