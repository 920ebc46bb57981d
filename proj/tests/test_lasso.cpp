#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "lf/lasso.hpp"

using namespace lf;

namespace {

Matrix random_columns(Index n, Index J, RngStream& rng, double corr = 0.3) {
    Matrix x(n, J);
    for (Index i = 0; i < n; ++i) {
        const double common = rng.normal();
        for (Index j = 0; j < J; ++j) x(i, j) = corr * common + rng.normal() * (1.0 + 0.2 * j);
    }
    return x;
}

Vector linear_target(const Matrix& x, RngStream& rng, double noise = 0.5) {
    Vector y(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double s = 0.3;
        for (Eigen::Index j = 0; j < x.cols(); ++j) s += (j % 2 == 0 ? 1.0 : -0.5) * x(i, j) / (1.0 + j);
        y(i) = s + noise * rng.normal();
    }
    return y;
}

// Objective written out from its definition, penalty weight = population sd.
double oracle_objective(const Matrix& x, const Vector& y, double b0, const Vector& b, double lambda) {
    const double n = static_cast<double>(x.rows());
    double rss = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double f = b0;
        for (Eigen::Index j = 0; j < x.cols(); ++j) f += x(i, j) * b(j);
        rss += (y(i) - f) * (y(i) - f);
    }
    double pen = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double m = x.col(j).mean();
        const double sd = std::sqrt((x.col(j).array() - m).square().sum() / n);
        pen += sd * std::abs(b(j));
    }
    return rss / n + lambda * pen;
}

// Coarse-to-fine grid search over three slopes with the intercept profiled out.
Vector grid_minimizer(const Matrix& x, const Vector& y, double lambda) {
    const Vector xm = x.colwise().mean();
    const double ym = y.mean();
    auto obj = [&](const Vector& b) { return oracle_objective(x, y, ym - xm.dot(b), b, lambda); };
    Vector center = Vector::Zero(3);
    double step = 0.1;
    int half = 30;
    for (int round = 0; round < 6; ++round) {
        Vector best = center;
        double best_v = obj(center);
        Vector b(3);
        for (int a = -half; a <= half; ++a)
            for (int c = -half; c <= half; ++c)
                for (int e = -half; e <= half; ++e) {
                    b << center(0) + a * step, center(1) + c * step, center(2) + e * step;
                    const double v = obj(b);
                    if (v < best_v) best_v = v, best = b;
                }
        center = best;
        step /= 10.0;
        half = 12;
    }
    return center;
}

}  // namespace

TEST_SUITE("lasso") {

TEST_CASE("lambda zero matches the normal equations") {
    RngStream rng(1, 0);
    for (int rep = 0; rep < 10; ++rep) {
        Matrix x = random_columns(60, 5, rng);
        Vector y = linear_target(x, rng);
        auto prob = LassoProblem::from_columns(x, y, 1.0, nullptr, 0.0, false);
        LassoOptions opts;
        opts.tol = 1e-13;
        auto sol = coordinate_descent(prob, 0.0, opts);

        Eigen::MatrixXd a(60, 6);
        a.col(0).setOnes();
        a.rightCols(5) = x;
        Eigen::VectorXd beta = (a.transpose() * a).ldlt().solve(a.transpose() * y);
        CHECK(std::abs(sol.gamma0 - beta(0)) < 1e-8);
        for (int j = 0; j < 5; ++j) CHECK(std::abs(sol.gamma(j) - beta(j + 1)) < 1e-8);
    }
}

TEST_CASE("KKT conditions hold along the path") {
    RngStream rng(2, 0);
    for (int rep = 0; rep < 10; ++rep) {
        Matrix x = random_columns(80, 12, rng, 0.7);
        Vector y = linear_target(x, rng, 1.0);
        for (bool pen : {false, true}) {
            auto prob = LassoProblem::from_columns(x, y, 1.0, nullptr, 0.0, pen);
            auto path = solve_path(prob, lambda_path(prob, 30, 1e-3));
            for (const auto& s : path) {
                CHECK(s.converged);
                CHECK(kkt_residual(prob, s) <= 1e-5);
                CHECK(s.kkt_residual == doctest::Approx(kkt_residual(prob, s)));
            }
        }
    }
}

TEST_CASE("three-variable problems match a brute-force grid minimizer") {
    RngStream rng(3, 0);
    for (int rep = 0; rep < 3; ++rep) {
        Matrix x = random_columns(40, 3, rng);
        Vector y = linear_target(x, rng);
        auto prob = LassoProblem::from_columns(x, y, 1.0, nullptr, 0.0, false);
        const double lam = lambda_max(prob) * (0.05 + 0.2 * rep);
        LassoOptions opts;
        opts.tol = 1e-12;
        auto sol = coordinate_descent(prob, lam, opts);
        Vector oracle = grid_minimizer(x, y, lam);
        for (int j = 0; j < 3; ++j) CHECK(std::abs(sol.gamma(j) - oracle(j)) < 2e-3);
        CHECK(lasso_objective(prob, sol) <= oracle_objective(x, y, y.mean() - x.colwise().mean().dot(oracle), oracle, lam) + 1e-9);
    }
}

TEST_CASE("everything is zero at lambda_max and not just below it") {
    RngStream rng(4, 0);
    Matrix x = random_columns(50, 6, rng);
    Vector y = linear_target(x, rng);
    auto prob = LassoProblem::from_columns(x, y, 1.0, nullptr, 0.0, false);
    const double lm = lambda_max(prob);
    auto at = coordinate_descent(prob, lm * 1.0001);
    CHECK(at.n_nonzero == 0);
    CHECK(at.gamma0 == doctest::Approx(y.mean()));
    auto below = coordinate_descent(prob, lm * 0.95);
    CHECK(below.n_nonzero >= 1);

    auto path = lambda_path(prob, 10, 1e-2);
    CHECK(path.size() == 10);
    CHECK(path.front() == doctest::Approx(lm));
    CHECK(path.back() == doctest::Approx(lm * 1e-2));
    CHECK(std::is_sorted(path.rbegin(), path.rend()));
}

TEST_CASE("warm and cold starts reach the same solution") {
    RngStream rng(5, 0);
    Matrix x = random_columns(70, 8, rng, 0.8);
    Vector y = linear_target(x, rng);
    auto prob = LassoProblem::from_columns(x, y);
    auto lams = lambda_path(prob, 20, 1e-3);
    LassoOptions opts;
    opts.tol = 1e-11;
    auto warm = solve_path(prob, lams, opts);
    for (Index k = 0; k < lams.size(); k += 4) {
        auto cold = coordinate_descent(prob, lams[k], opts);
        CHECK(test::max_abs_diff(cold.gamma, warm[k].gamma) < 1e-6);
        CHECK(std::abs(cold.objective - warm[k].objective) < 1e-10);
    }
}

TEST_CASE("rescaling a column rescales its coefficient inversely") {
    RngStream rng(6, 0);
    Matrix x = random_columns(60, 4, rng);
    Vector y = linear_target(x, rng);
    Matrix x2 = x;
    x2.col(2) *= 7.0;
    auto p1 = LassoProblem::from_columns(x, y, 1.0, nullptr, 0.0, false);
    auto p2 = LassoProblem::from_columns(x2, y, 1.0, nullptr, 0.0, false);
    LassoOptions opts;
    opts.tol = 1e-12;
    const double lam = 0.1 * lambda_max(p1);
    auto s1 = coordinate_descent(p1, lam, opts);
    auto s2 = coordinate_descent(p2, lam, opts);
    CHECK(s2.gamma(2) * 7.0 == doctest::Approx(s1.gamma(2)).epsilon(1e-7));
    CHECK(s2.gamma(0) == doctest::Approx(s1.gamma(0)).epsilon(1e-7));

    // scaling every column and the target by c scales the penalty weights too
    auto p3 = LassoProblem::from_columns(x, y, 3.0, nullptr, 0.0, false);
    auto s3 = coordinate_descent(p3, lam, opts);
    CHECK(test::max_abs_diff(s3.gamma * 3.0, s1.gamma) < 1e-7);
}

TEST_CASE("an offset is the same as subtracting it from the target") {
    RngStream rng(7, 0);
    Matrix x = random_columns(50, 5, rng);
    Vector y = linear_target(x, rng);
    Vector o(50);
    for (auto& v : o) v = rng.normal();
    auto with = LassoProblem::from_columns(x, y, 1.0, &o, 0.4);
    auto shifted = LassoProblem::from_columns(x, y - 0.4 * o);
    CHECK(lambda_max(with) == doctest::Approx(lambda_max(shifted)));
    LassoOptions opts;
    opts.tol = 1e-12;
    const double lam = 0.2 * lambda_max(with);
    auto a = coordinate_descent(with, lam, opts);
    auto b = coordinate_descent(shifted, lam, opts);
    CHECK(test::max_abs_diff(a.gamma, b.gamma) < 1e-9);
    CHECK(std::abs(a.gamma0 - b.gamma0) < 1e-9);
}

TEST_CASE("constant columns are never selected") {
    RngStream rng(8, 0);
    Matrix x = random_columns(40, 3, rng);
    x.col(1).setConstant(2.5);
    Vector y = linear_target(x, rng);
    auto prob = LassoProblem::from_columns(x, y, 1.0, nullptr, 0.0, false);
    CHECK(penalty_weights(prob)(2) == 0.0);
    auto sol = coordinate_descent(prob, 0.01 * lambda_max(prob));
    CHECK(sol.gamma(1) == 0.0);
}

TEST_CASE("folds partition the rows evenly") {
    RngStream rng(9, 0);
    auto f = assign_folds(23, 5, rng);
    std::vector<int> size(5, 0);
    for (Index v : f) {
        REQUIRE(v < 5);
        ++size[v];
    }
    CHECK(*std::max_element(size.begin(), size.end()) - *std::min_element(size.begin(), size.end()) <= 1);
    RngStream again(9, 0);
    CHECK(assign_folds(23, 5, again) == f);
}

TEST_CASE("cross-validation picks the argmin or the one-SE lambda") {
    RngStream rng(10, 0);
    Matrix x = random_columns(100, 10, rng, 0.5);
    Vector y = linear_target(x, rng, 2.0);
    auto prob = LassoProblem::from_columns(x, y);
    RngStream frng(10, 1);
    auto folds = assign_folds(100, 5, frng);
    CvOptions opts;
    opts.n_lambda = 40;
    auto cv = cv_select_lambda(prob, folds, opts);
    REQUIRE(cv.lambdas.size() == 40);
    REQUIRE(cv.cv_errors.size() == 40);
    const auto it = std::min_element(cv.cv_errors.begin(), cv.cv_errors.end());
    CHECK(cv.cv_errors[cv.chosen_index] == *it);
    CHECK(cv.chosen_lambda == cv.lambdas[cv.chosen_index]);
    CHECK(cv.fold_assignment == folds);

    // fold error from scratch at the chosen lambda
    double total = 0.0;
    for (Index k = 0; k < 5; ++k) {
        std::vector<Index> train, test;
        for (Index i = 0; i < 100; ++i) (folds[i] == k ? test : train).push_back(i);
        auto sub = prob.subset(train);
        auto path = solve_path(sub, std::vector<double>(cv.lambdas.begin(), cv.lambdas.begin() + cv.chosen_index + 1), opts.solver);
        const auto& s = path.back();
        double se = 0.0;
        for (Index i : test) {
            const double f = s.gamma0 + x.row(i).dot(s.gamma);
            se += (y(i) - f) * (y(i) - f);
        }
        total += se / test.size();
    }
    CHECK(cv.cv_errors[cv.chosen_index] == doctest::Approx(total / 5).epsilon(1e-6));

    opts.one_se_rule = true;
    auto cv1 = cv_select_lambda(prob, folds, opts);
    CHECK(cv1.chosen_lambda >= cv.chosen_lambda);
    CHECK(cv1.cv_errors[cv1.chosen_index] <= *it + cv.cv_se[cv.chosen_index] + 1e-12);

    auto par = cv_select_lambda(prob, folds, CvOptions{40, 1e-4, false, {}}, Exec{4});
    CHECK(par.cv_errors == cv.cv_errors);
}

TEST_CASE("more learners than rows still converges with valid KKT") {
    RngStream rng(11, 0);
    Matrix x = random_columns(30, 60, rng, 0.9);
    Vector y = linear_target(x, rng);
    auto prob = LassoProblem::from_columns(x, y);
    auto path = solve_path(prob, lambda_path(prob, 50, 1e-4));
    for (const auto& s : path) {
        CHECK(s.converged);
        CHECK(kkt_residual(prob, s) <= 1e-5);
        CHECK(s.n_nonzero <= 30);
    }
}

TEST_CASE("the objective never increases as the sweep budget grows") {
    RngStream rng(12, 0);
    Matrix x = random_columns(25, 40, rng, 0.9);
    Vector y = linear_target(x, rng);
    auto prob = LassoProblem::from_columns(x, y);
    const double lam = 1e-3 * lambda_max(prob);
    double prev = 1e300;
    for (Index it = 1; it <= 200; it += 7) {
        LassoOptions o;
        o.max_iter = it;
        const double obj = coordinate_descent(prob, lam, o).objective;
        CHECK(obj <= prev + 1e-15);
        prev = obj;
    }
}

TEST_CASE("problem validation") {
    LassoProblem p;
    p.design = ColMatrix::Ones(5, 2);
    p.target = Vector::Zero(4);
    p.offset = Vector::Zero(5);
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
}

}
