#include "lf/theory.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "lf/forest.hpp"

namespace lf::theory {

namespace {

void check_j(const TheoryParams& p) {
    if (p.J < 1) throw InvalidArgument("theory: J must be >= 1");
}

Estimate summarize(const std::vector<double>& v) {
    Estimate e;
    e.mean = sample_mean(v);
    e.se = v.size() > 1 ? sample_sd(v) / std::sqrt(static_cast<double>(v.size())) : 0.0;
    return e;
}

}  // namespace

double term_a(const TheoryParams& p) {
    check_j(p);
    const double J = static_cast<double>(p.J);
    return p.eta * p.eta + p.psi / J + (J * (J - 1.0) / (J * J)) * p.omega;
}

double term_b(const TheoryParams& p) {
    check_j(p);
    if (p.N <= p.J + 1)
        throw InvalidArgument("theory: the regression formula needs N > J + 1 (N = " + std::to_string(p.N) +
                              ", J = " + std::to_string(p.J) + "); use min_norm_mse_limit for J > N");
    return p.sigma2 / static_cast<double>(p.N - p.J - 1);
}

double mse_mean_formula(const TheoryParams& p) { return term_a(p) + p.phi; }

double mse_reg_formula(const TheoryParams& p) { return term_b(p) + p.phi; }

double mse_ada_formula(const TheoryParams& p, double theta) {
    if (!(theta >= 0.0 && theta <= 1.0)) throw InvalidArgument("mse_ada_formula: theta must lie in [0, 1]");
    const double a = term_a(p);
    const double b = term_b(p);
    return (1.0 - theta) * (1.0 - theta) * a + theta * theta * b + p.phi;
}

OptimalTheta optimal_theta(const TheoryParams& p) {
    const double a = term_a(p);
    const double b = term_b(p);
    if (a + b == 0.0) return {0.5, true};
    return {a / (a + b), false};
}

double blend_threshold(double c) {
    if (!(c > 0.0 && c <= 1.0)) throw InvalidArgument("blend_threshold: c must lie in (0, 1]");
    return 2.0 * c / (c + 1.0);
}

double min_norm_mse_limit(double r, double sigma2) {
    if (!(r > 1.0)) throw InvalidArgument("min_norm_mse_limit: r = J / N must exceed 1");
    if (!(sigma2 >= 0.0)) throw InvalidArgument("min_norm_mse_limit: sigma2 must be nonnegative");
    return 1.0 - 1.0 / r + sigma2 * r / (r - 1.0);
}

// ---- Gaussian oracle ----

void GaussianOracleConfig::validate() const {
    const auto j = W.rows();
    if (j < 1 || W.cols() != j) throw InvalidArgument("gaussian oracle: W must be square and nonempty");
    if (!W.isApprox(W.transpose(), 1e-12)) throw InvalidArgument("gaussian oracle: W must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(W, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, eig.eigenvalues().maxCoeff()))
        throw InvalidArgument("gaussian oracle: W must be positive semidefinite");
    if (Gamma.size() != j + 1) throw InvalidArgument("gaussian oracle: Gamma must have length J + 1");
    if (std::abs(Gamma.tail(j).sum() - 1.0) > 1e-9)
        throw InvalidArgument("gaussian oracle: learner coefficients Gamma_1..Gamma_J must sum to 1");
    if (N <= J() + 1) throw InvalidArgument("gaussian oracle: need N > J + 1");
    if (!(sigma > 0.0)) throw InvalidArgument("gaussian oracle: sigma must be positive");
    if (trials < 100) throw InvalidArgument("gaussian oracle: trials must be >= 100");
    if (test_points < 1) throw InvalidArgument("gaussian oracle: test_points must be >= 1");
}

double GaussianOracleConfig::phi() const {
    const Vector g = Gamma.tail(W.rows());
    return g.dot(W * g);
}

TheoryParams GaussianOracleConfig::implied_params() const {
    const auto j = W.rows();
    const Vector g = Gamma.tail(j);
    const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(j, j) - Vector::Ones(j) * g.transpose();
    const Eigen::MatrixXd v = m * W * m.transpose();
    TheoryParams p;
    p.J = static_cast<Index>(j);
    p.N = N;
    p.sigma2 = sigma * sigma;
    p.phi = phi();
    p.mu = Gamma(0);
    p.eta = -Gamma(0);
    p.psi = v.diagonal().mean();
    p.omega = j > 1 ? (v.sum() - v.trace()) / static_cast<double>(j * (j - 1)) : 0.0;
    return p;
}

GaussianOracleConfig equal_weight_oracle(Index J, Index N, double sigma, double gamma0) {
    GaussianOracleConfig c;
    const auto j = static_cast<Eigen::Index>(J);
    c.W = Eigen::MatrixXd::Identity(j, j);
    c.Gamma = Vector::Constant(j + 1, 1.0 / static_cast<double>(J));
    c.Gamma(0) = gamma0;
    c.N = N;
    c.sigma = sigma;
    return c;
}

namespace {

struct TrialOut {
    std::vector<double> pred;    // per theta
    std::vector<double> excess;  // per theta
    Index redrawn = 0;
};

Eigen::MatrixXd gaussian_rows(Index n, const Eigen::MatrixXd& chol_l, RngStream& rng) {
    const auto j = chol_l.rows();
    Eigen::MatrixXd z(static_cast<Eigen::Index>(n), j);
    for (Eigen::Index i = 0; i < z.rows(); ++i)
        for (Eigen::Index k = 0; k < j; ++k) z(i, k) = rng.normal();
    return z * chol_l.transpose();
}

// Lower factor L with W = L L'; semidefinite W goes through the eigen route.
Eigen::MatrixXd factor(const Eigen::MatrixXd& w) {
    Eigen::LLT<Eigen::MatrixXd> llt(w);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(w);
    const Vector d = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * d.asDiagonal();
}

}  // namespace

OracleResult gaussian_oracle_mc(const GaussianOracleConfig& cfg, const std::vector<double>& thetas,
                                const RngStream& rng, Exec exec) {
    cfg.validate();
    for (double t : thetas)
        if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("gaussian_oracle_mc: theta must lie in [0, 1]");
    const Eigen::MatrixXd L = factor(cfg.W);
    const auto J = cfg.W.rows();
    const double g0 = cfg.Gamma(0);
    const Vector g = cfg.Gamma.tail(J);
    std::vector<double> all_thetas = thetas;
    all_thetas.push_back(0.0);
    all_thetas.push_back(1.0);
    const Index K = all_thetas.size();

    std::vector<TrialOut> out(cfg.trials);
    parallel_for(cfg.trials, exec, [&](Index t) {
        RngStream r = rng.child(t);
        TrialOut& o = out[t];
        Vector coef;
        for (;;) {
            const Eigen::MatrixXd f = gaussian_rows(cfg.N, L, r);
            Eigen::MatrixXd x(f.rows(), J + 1);
            x.col(0).setOnes();
            x.rightCols(J) = f;
            Vector y = (f * g).array() + g0;
            for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += cfg.sigma * r.normal();
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
            if (qr.rank() == J + 1) {
                coef = qr.solve(y);
                break;
            }
            if (++o.redrawn > 100) throw DegenerateError("gaussian_oracle_mc: design singular in 100 redraws");
        }
        const Eigen::MatrixXd fs = gaussian_rows(cfg.test_points, L, r);
        const Vector mu = (fs * g).array() + g0;
        Vector ys = mu;
        for (Eigen::Index i = 0; i < ys.size(); ++i) ys(i) += cfg.sigma * r.normal();
        const Vector y_mean = fs.rowwise().mean();
        const Vector y_reg = (fs * coef.tail(J)).array() + coef(0);
        o.pred.resize(K);
        o.excess.resize(K);
        for (Index k = 0; k < K; ++k) {
            const double th = all_thetas[k];
            const Vector yh = th * y_reg + (1.0 - th) * y_mean;
            o.pred[k] = (ys - yh).squaredNorm() / static_cast<double>(ys.size());
            o.excess[k] = (mu - yh).squaredNorm() / static_cast<double>(ys.size());
        }
    });

    OracleResult res;
    std::vector<double> col(cfg.trials);
    const auto column = [&](Index k, bool excess) {
        for (Index t = 0; t < cfg.trials; ++t) col[t] = excess ? out[t].excess[k] : out[t].pred[k];
        return summarize(col);
    };
    for (Index k = 0; k < thetas.size(); ++k)
        res.points.push_back({thetas[k], column(k, false), column(k, true)});
    res.mean_prediction_mse = column(K - 2, false);
    res.reg_prediction_mse = column(K - 1, false);
    for (const auto& o : out) res.redrawn += o.redrawn;
    return res;
}

double oracle_exact_prediction_mse(const GaussianOracleConfig& cfg, double theta) {
    cfg.validate();
    const double n = static_cast<double>(cfg.N);
    const double j = static_cast<double>(cfg.J());
    if (!(n > j + 2.0)) throw InvalidArgument("oracle_exact_prediction_mse: needs N > J + 2");
    const double s2 = cfg.sigma * cfg.sigma;
    const double a = term_a(cfg.implied_params());
    const double b = s2 * ((n + 1.0) * (n - 2.0) / (n * (n - j - 2.0)) - 1.0);
    return s2 + (1.0 - theta) * (1.0 - theta) * a + theta * theta * b;
}

// ---- minimum-norm regime ----

void MinNormConfig::validate() const {
    if (N < 1 || J <= N) throw InvalidArgument("min_norm_mc: needs J > N >= 1");
    if (!(sigma2 >= 0.0)) throw InvalidArgument("min_norm_mc: sigma2 must be nonnegative");
    if (trials < 2 || test_points < 1) throw InvalidArgument("min_norm_mc: trials >= 2 and test_points >= 1");
    if (!(rcond > 0.0 && rcond < 1.0)) throw InvalidArgument("min_norm_mc: rcond must lie in (0, 1)");
}

Estimate min_norm_mc(const MinNormConfig& cfg, const RngStream& rng, Exec exec) {
    cfg.validate();
    const auto J = static_cast<Eigen::Index>(cfg.J);
    const auto N = static_cast<Eigen::Index>(cfg.N);
    const double sd = std::sqrt(cfg.sigma2);
    std::vector<double> mse(cfg.trials);
    parallel_for(cfg.trials, exec, [&](Index t) {
        RngStream r = rng.child(t);
        Vector gamma(J);
        for (Eigen::Index k = 0; k < J; ++k) gamma(k) = r.normal() / std::sqrt(static_cast<double>(J));
        Eigen::MatrixXd f(N, J);
        for (Eigen::Index i = 0; i < N; ++i)
            for (Eigen::Index k = 0; k < J; ++k) f(i, k) = r.normal();
        Vector y = f * gamma;
        for (Eigen::Index i = 0; i < N; ++i) y(i) += sd * r.normal();
        Eigen::BDCSVD<Eigen::MatrixXd> svd(f, Eigen::ComputeThinU | Eigen::ComputeThinV);
        svd.setThreshold(cfg.rcond);
        const Vector b = svd.solve(y);
        double sse = 0.0;
        for (Index m = 0; m < cfg.test_points; ++m) {
            double truth = 0.0, pred = 0.0;
            for (Eigen::Index k = 0; k < J; ++k) {
                const double x = r.normal();
                truth += x * gamma(k);
                pred += x * b(k);
            }
            const double e = truth + sd * r.normal() - pred;
            sse += e * e;
        }
        mse[t] = sse / static_cast<double>(cfg.test_points);
    });
    return summarize(mse);
}

// ---- bivariate scaling study ----

void ScalingConfig::validate() const {
    if (s_grid.size() < 4) throw InvalidArgument("variance_scaling: s_grid needs at least 4 points");
    for (Index k = 0; k < s_grid.size(); ++k) {
        if (!(s_grid[k] > 0.0)) throw InvalidArgument("variance_scaling: s values must be positive");
        if (k > 0 && !(s_grid[k - 1] < s_grid[k])) throw InvalidArgument("variance_scaling: s_grid must ascend");
    }
    if (s_grid.back() / s_grid.front() < 10.0 - 1e-12)
        throw InvalidArgument("variance_scaling: s_grid must span at least one decade");
    if (beta1 * beta1 + beta2 * beta2 == 0.0) throw InvalidArgument("variance_scaling: beta is zero");
    if (N < 5 || learners < 2 || replications < 2 || test_points < 1)
        throw InvalidArgument("variance_scaling: need N >= 5, learners >= 2, replications >= 2, test_points >= 1");
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("ls_slope: need two equal-length series");
    const double mx = sample_mean(x), my = sample_mean(y);
    double sxy = 0.0, sxx = 0.0;
    for (Index i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0) throw InvalidArgument("ls_slope: x is constant");
    return sxy / sxx;
}

ScalingResult variance_scaling(const ScalingConfig& cfg, const RngStream& rng, Exec exec) {
    cfg.validate();
    const bool both = cfg.mode == LearnerSpec::correct;
    const Eigen::Index q = both ? 3 : 2;  // intercept + features
    const double phi = cfg.beta1 * cfg.beta1 + cfg.beta2 * cfg.beta2;
    const auto M = static_cast<Eigen::Index>(cfg.test_points);
    const auto J = static_cast<Eigen::Index>(cfg.learners);

    RngStream test_rng = rng.child(0);
    Eigen::MatrixXd xt(M, q);
    for (Eigen::Index m = 0; m < M; ++m) {
        xt(m, 0) = 1.0;
        const double x1 = test_rng.normal();
        const double x2 = test_rng.normal();
        xt(m, 1) = x1;
        if (both) xt(m, 2) = x2;
    }

    ScalingResult res;
    std::vector<double> log_s, log_psi, log_omega;
    for (Index si = 0; si < cfg.s_grid.size(); ++si) {
        const double s = cfg.s_grid[si];
        const double sigma = std::sqrt(phi / s);
        const RngStream s_rng = rng.child(1000 + si);
        // preds[r] is learners x M
        std::vector<Eigen::MatrixXd> preds(cfg.replications);
        std::vector<double> unique(cfg.replications);
        parallel_for(cfg.replications, exec, [&](Index rep) {
            RngStream r = s_rng.child(rep);
            const Index n = cfg.N;
            Eigen::MatrixXd x(static_cast<Eigen::Index>(n), q);
            Vector y(static_cast<Eigen::Index>(n));
            for (Index i = 0; i < n; ++i) {
                const auto ii = static_cast<Eigen::Index>(i);
                const double x1 = r.normal();
                const double x2 = r.normal();
                x(ii, 0) = 1.0;
                x(ii, 1) = x1;
                if (both) x(ii, 2) = x2;
                y(ii) = cfg.beta1 * x1 + cfg.beta2 * x2 + sigma * r.normal();
            }
            Eigen::MatrixXd& p = preds[rep];
            p.resize(J, M);
            double uniq_total = 0.0;
            for (Eigen::Index j = 0; j < J; ++j) {
                for (int attempt = 0;; ++attempt) {
                    const auto bag = bootstrap_sample(n, r);
                    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(q, q);
                    Vector xty = Vector::Zero(q);
                    for (Index i : bag) {
                        const auto row = x.row(static_cast<Eigen::Index>(i));
                        xtx.noalias() += row.transpose() * row;
                        xty.noalias() += row.transpose() * y(static_cast<Eigen::Index>(i));
                    }
                    Eigen::FullPivLU<Eigen::MatrixXd> lu(xtx);
                    if (lu.rank() == q) {
                        p.row(j) = (xt * lu.solve(xty)).transpose();
                        uniq_total += static_cast<double>(std::set<Index>(bag.begin(), bag.end()).size());
                        break;
                    }
                    if (attempt > 100) throw DegenerateError("variance_scaling: singular bootstrap design");
                }
            }
            unique[rep] = uniq_total / static_cast<double>(J);
        });

        const double total = static_cast<double>(cfg.replications) * static_cast<double>(J);
        double psi = 0.0, omega = 0.0;
        for (Eigen::Index m = 0; m < M; ++m) {
            double sum = 0.0;
            for (const auto& p : preds) sum += p.col(m).sum();
            const double centre = sum / total;
            double ss = 0.0, pair = 0.0;
            for (const auto& p : preds) {
                const Vector c = p.col(m).array() - centre;
                const double cs = c.sum();
                const double cq = c.squaredNorm();
                ss += cq;
                pair += (cs * cs - cq) / static_cast<double>(J * (J - 1));
            }
            psi += ss / (total - 1.0);
            omega += pair / static_cast<double>(cfg.replications);
        }
        ScalingPoint pt;
        pt.s = s;
        pt.sigma2 = sigma * sigma;
        pt.psi = psi / static_cast<double>(M);
        pt.omega = omega / static_cast<double>(M);
        pt.mean_unique_rows = sample_mean(unique);
        res.points.push_back(pt);
        log_s.push_back(std::log(s));
        log_psi.push_back(std::log(pt.psi));
        log_omega.push_back(std::log(std::max(pt.omega, 1e-300)));
    }
    res.psi_slope = ls_slope(log_s, log_psi);
    res.omega_slope = ls_slope(log_s, log_omega);
    return res;
}

}  // namespace lf::theory
