#include "lf/simgen.hpp"

#include <cmath>
#include <span>
#include <type_traits>
#include <string>

namespace lf {

namespace {

constexpr int kMaxRedraws = 100;

double draw_sparse(double c, double pi, RngStream& rng) {
    if (!rng.bernoulli(pi)) return 0.0;
    // (0, c]: 1 - U lies in (0, 1].
    return c * (1.0 - rng.uniform());
}

void check_common(Index n, Index p, double c, double pi, double snr, const char* who) {
    const std::string w(who);
    if (n < 1) throw InvalidArgument(w + ": n must be >= 1");
    if (p < 1) throw InvalidArgument(w + ": p must be >= 1");
    if (!(c > 0.0)) throw InvalidArgument(w + ": c must be positive");
    if (!(pi >= 0.0 && pi <= 1.0)) throw InvalidArgument(w + ": pi must lie in [0, 1]");
    if (!(snr > 0.0) || !std::isfinite(snr)) throw InvalidArgument(w + ": snr must be positive and finite");
}

void check_coefficient(double v, double c, const char* who) {
    if (v != 0.0 && !(v > 0.0 && v <= c))
        throw InvalidArgument(std::string(who) + ": nonzero coefficients must lie in (0, c]");
}

}  // namespace

void PolyDgpSpec::validate() const {
    check_common(n, p, c, pi, snr, "polynomial dgp");
    if (alpha.size() == 0 && beta.size() == 0) return;
    const auto pp = static_cast<Eigen::Index>(p);
    if (alpha.size() != pp || beta.rows() != pp || beta.cols() != pp)
        throw InvalidArgument("polynomial dgp: alpha must have length p and beta must be p x p");
    for (Eigen::Index j = 0; j < pp; ++j) {
        check_coefficient(alpha(j), c, "polynomial dgp");
        for (Eigen::Index k = j + 1; k < pp; ++k) check_coefficient(beta(j, k), c, "polynomial dgp");
    }
}

void draw_poly_coefficients(PolyDgpSpec& spec, RngStream& rng) {
    check_common(spec.n, spec.p, spec.c, spec.pi, spec.snr, "polynomial dgp");
    const auto p = static_cast<Eigen::Index>(spec.p);
    for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
        spec.alpha = Vector::Zero(p);
        spec.beta = Matrix::Zero(p, p);
        bool any = false;
        for (Eigen::Index j = 0; j < p; ++j) {
            spec.alpha(j) = draw_sparse(spec.c, spec.pi, rng);
            any = any || spec.alpha(j) != 0.0;
        }
        for (Eigen::Index j = 0; j < p; ++j)
            for (Eigen::Index k = j + 1; k < p; ++k) {
                spec.beta(j, k) = draw_sparse(spec.c, spec.pi, rng);
                any = any || spec.beta(j, k) != 0.0;
            }
        if (any) return;
    }
    throw DegenerateError("polynomial dgp: every coefficient drew zero in 100 attempts; signal variance is 0");
}

PolyDgpSpec fixed_support_spec(Index n, Index p, Index k, double c, double snr) {
    if (k < 1 || k > p) throw InvalidArgument("fixed_support_spec: need 1 <= k <= p");
    PolyDgpSpec s;
    s.n = n;
    s.p = p;
    s.c = c;
    s.pi = 1.0;
    s.snr = snr;
    s.alpha = Vector::Zero(static_cast<Eigen::Index>(p));
    s.alpha.head(static_cast<Eigen::Index>(k)).setConstant(c);
    s.beta = Matrix::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    s.validate();
    return s;
}

double analytic_signal_variance(const PolyDgpSpec& spec) {
    if (!spec.has_coefficients()) throw InvalidArgument("analytic_signal_variance: coefficients not drawn");
    double phi = spec.alpha.squaredNorm();
    const auto p = static_cast<Eigen::Index>(spec.p);
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index k = j + 1; k < p; ++k) phi += spec.beta(j, k) * spec.beta(j, k);
    return phi;
}

Vector polynomial_signal(const PolyDgpSpec& spec, const Matrix& x) {
    if (!spec.has_coefficients()) throw InvalidArgument("polynomial_signal: coefficients not drawn");
    const auto p = static_cast<Eigen::Index>(spec.p);
    if (x.cols() != p) throw InvalidArgument("polynomial_signal: feature count differs from p");
    Vector g = x * spec.alpha;
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index k = j + 1; k < p; ++k) {
            const double b = spec.beta(j, k);
            if (b != 0.0) g += b * x.col(j).cwiseProduct(x.col(k));
        }
    return g;
}

Matrix standard_normal_matrix(Index n, Index p, RngStream& rng) {
    Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal();
    return x;
}

Dataset with_noise(const Matrix& x, const Vector& signal, double sigma2, RngStream& rng) {
    if (signal.size() != x.rows()) throw InvalidArgument("with_noise: signal length differs from row count");
    if (!(sigma2 >= 0.0)) throw InvalidArgument("with_noise: sigma2 must be nonnegative");
    Dataset d;
    d.features = x;
    d.signal = signal;
    const double sd = std::sqrt(sigma2);
    d.response.resize(signal.size());
    for (Eigen::Index i = 0; i < signal.size(); ++i) d.response(i) = signal(i) + sd * rng.normal();
    for (Eigen::Index j = 0; j < x.cols(); ++j) d.feature_names.push_back("x" + std::to_string(j + 1));
    return d;
}

Dataset gen_polynomial(PolyDgpSpec spec, RngStream& rng) {
    spec.validate();
    if (!spec.has_coefficients()) draw_poly_coefficients(spec, rng);
    const double phi = analytic_signal_variance(spec);
    if (phi == 0.0) throw DegenerateError("gen_polynomial: all coefficients are zero; SNR undefined");
    const Matrix x = standard_normal_matrix(spec.n, spec.p, rng);
    return with_noise(x, polynomial_signal(spec, x), phi / spec.snr, rng);
}

double calibrate_noise(const Vector& signal, double snr) {
    if (!(snr > 0.0)) throw InvalidArgument("calibrate_noise: snr must be positive");
    const double v = sample_variance({signal.data(), static_cast<Index>(signal.size())});
    if (!(v > 0.0)) throw DegenerateError("calibrate_noise: signal has zero variance");
    return v / snr;
}

// ---- tree ensemble generator ----

void TreeDgpSpec::validate() const {
    check_common(n, p, c, pi, snr, "tree dgp");
    if (!(rho >= 0.0 && rho < 1.0)) throw InvalidArgument("tree dgp: rho must lie in [0, 1)");
    if (max_leaves < 2) throw InvalidArgument("tree dgp: max_leaves must be >= 2");
    if (phi_sample < 2) throw InvalidArgument("tree dgp: phi_sample must be >= 2");
    if (beta.size() == 0) return;
    if (beta.size() != static_cast<Eigen::Index>(p)) throw InvalidArgument("tree dgp: beta must have length p");
    for (Eigen::Index j = 0; j < beta.size(); ++j) check_coefficient(beta(j), c, "tree dgp");
}

Matrix TreeDgp::tree_columns(const Matrix& x) const {
    if (x.cols() != static_cast<Eigen::Index>(spec.p)) throw InvalidArgument("tree dgp: feature count differs from p");
    Matrix t(x.rows(), static_cast<Eigen::Index>(base.size()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const std::span<const double> row(x.row(i).data(), spec.p);
        double prev = 0.0;
        for (Index j = 0; j < base.size(); ++j) {
            const double v = base[j].predict(row) + (j > 0 ? spec.rho * prev : 0.0);
            t(i, static_cast<Eigen::Index>(j)) = v;
            prev = v;
        }
    }
    return t;
}

Vector TreeDgp::signal(const Matrix& x) const { return tree_columns(x) * spec.beta; }

TreeDgp build_tree_dgp(TreeDgpSpec spec, RngStream& rng) {
    spec.validate();
    RngStream beta_rng = rng.child(0);
    if (spec.beta.size() == 0) {
        int attempt = 0;
        for (; attempt < kMaxRedraws; ++attempt) {
            spec.beta = Vector(static_cast<Eigen::Index>(spec.p));
            for (Eigen::Index j = 0; j < spec.beta.size(); ++j) spec.beta(j) = draw_sparse(spec.c, spec.pi, beta_rng);
            if (spec.beta.any()) break;
        }
        if (attempt == kMaxRedraws)
            throw DegenerateError("tree dgp: every coefficient drew zero in 100 attempts; signal variance is 0");
    }
    TreeDgp dgp;
    dgp.spec = spec;

    RngStream ref_rng = rng.child(1);
    Dataset ref;
    ref.features = standard_normal_matrix(spec.n, spec.p, ref_rng);
    TreeParams params;
    params.mtry = spec.p;
    params.min_node_size = 5;
    params.max_leaf_nodes = spec.max_leaves;
    for (Index j = 0; j < spec.p; ++j) {
        RngStream tr = rng.child(100 + j);
        ref.response.resize(static_cast<Eigen::Index>(spec.n));
        for (Eigen::Index i = 0; i < ref.response.size(); ++i) ref.response(i) = tr.normal();
        const auto bag = bootstrap_sample(spec.n, tr);
        dgp.base.push_back(fit_tree(ref, bag, params, tr));
    }

    RngStream phi_rng = rng.child(2);
    const Vector g = dgp.signal(standard_normal_matrix(spec.phi_sample, spec.p, phi_rng));
    dgp.phi = sample_variance({g.data(), static_cast<Index>(g.size())});
    if (!(dgp.phi > 0.0)) throw DegenerateError("tree dgp: signal has zero variance");
    return dgp;
}

Dataset gen_tree_ensemble(const TreeDgp& dgp, RngStream& rng) {
    const Matrix x = standard_normal_matrix(dgp.spec.n, dgp.spec.p, rng);
    return with_noise(x, dgp.signal(x), dgp.phi / dgp.spec.snr, rng);
}

Dataset gen_tree_ensemble(const TreeDgpSpec& spec, RngStream& rng) {
    RngStream build = rng.child(0);
    const TreeDgp dgp = build_tree_dgp(spec, build);
    RngStream draw = rng.child(1);
    return gen_tree_ensemble(dgp, draw);
}

// ---- common interface ----

Index Dgp::p() const {
    return std::visit([](const auto& m) -> Index {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, PolyDgpSpec>) return m.p;
        else return m.spec.p;
    }, model);
}

Index Dgp::n() const {
    return std::visit([](const auto& m) -> Index {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, PolyDgpSpec>) return m.n;
        else return m.spec.n;
    }, model);
}

double Dgp::phi() const {
    return std::visit([](const auto& m) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, PolyDgpSpec>) return analytic_signal_variance(m);
        else return m.phi;
    }, model);
}

Vector Dgp::signal(const Matrix& x) const {
    return std::visit([&](const auto& m) -> Vector {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, PolyDgpSpec>) return polynomial_signal(m, x);
        else return m.signal(x);
    }, model);
}

Dataset draw_dataset(const Dgp& dgp, Index n, double snr, RngStream& rng) {
    if (!(snr > 0.0)) throw InvalidArgument("draw_dataset: snr must be positive");
    const double phi = dgp.phi();
    if (!(phi > 0.0)) throw DegenerateError("draw_dataset: signal variance is 0");
    const Matrix x = standard_normal_matrix(n, dgp.p(), rng);
    return with_noise(x, dgp.signal(x), phi / snr, rng);
}

}  // namespace lf
