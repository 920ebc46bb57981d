#pragma once

#include <variant>
#include <vector>

#include "lf/core.hpp"
#include "lf/forest.hpp"

namespace lf {

/// y = sum_j alpha_j x_j + sum_{j<k} beta_jk x_j x_k + eps, x ~ N(0, I).
struct PolyDgpSpec {
    Index n = 400;
    Index p = 50;
    double c = 0.1;   // cap on nonzero coefficients
    double pi = 0.5;  // probability a coefficient is nonzero
    double snr = 1.0;
    Vector alpha;     // length p
    Matrix beta;      // p x p, only the strict upper triangle is used

    /// Throws InvalidArgument on bad sizes or ranges. With coefficients
    /// present, nonzero entries must lie in (0, c].
    void validate() const;
    bool has_coefficients() const { return alpha.size() == static_cast<Eigen::Index>(p); }
};

/// Sparse draw: each coefficient is Bernoulli(pi) * Uniform(0, c]. An all-zero
/// draw is redrawn up to 100 times before DegenerateError.
void draw_poly_coefficients(PolyDgpSpec& spec, RngStream& rng);

/// alpha_1..alpha_k = c, everything else zero.
PolyDgpSpec fixed_support_spec(Index n, Index p, Index k, double c, double snr);

/// sum alpha^2 + sum_{j<k} beta^2, exact for iid standard normal features.
double analytic_signal_variance(const PolyDgpSpec& spec);

Vector polynomial_signal(const PolyDgpSpec& spec, const Matrix& x);

/// Draws coefficients first if the spec has none.
Dataset gen_polynomial(PolyDgpSpec spec, RngStream& rng);

/// Chained random step functions: T_1 = T0_1(x), T_j = T0_j(x) + rho T_{j-1},
/// signal = sum_j beta_j T_j.
struct TreeDgpSpec {
    Index n = 400;
    Index p = 50;
    double rho = 0.5;
    double c = 0.1;
    double pi = 0.5;
    double snr = 1.0;
    Vector beta;
    Index max_leaves = 5;
    Index phi_sample = 100000;

    void validate() const;
};

/// A tree DGP with its base trees grown and phi frozen.
struct TreeDgp {
    TreeDgpSpec spec;
    std::vector<RegressionTree> base;
    double phi = 0.0;

    /// n x p matrix of chained tree values T_j(x).
    Matrix tree_columns(const Matrix& x) const;
    Vector signal(const Matrix& x) const;
};

/// Draws beta if absent, grows p base trees (each on a fresh bootstrap of a
/// reference design with a fresh N(0, 1) response), then estimates phi on an
/// independent draw of spec.phi_sample rows.
TreeDgp build_tree_dgp(TreeDgpSpec spec, RngStream& rng);

Dataset gen_tree_ensemble(const TreeDgp& dgp, RngStream& rng);
Dataset gen_tree_ensemble(const TreeDgpSpec& spec, RngStream& rng);

/// sigma^2 = Var(signal) / snr with the sample variance.
double calibrate_noise(const Vector& signal, double snr);

/// Either generator behind one interface, coefficients already drawn.
struct Dgp {
    std::variant<PolyDgpSpec, TreeDgp> model;

    Index p() const;
    Index n() const;
    double phi() const;
    Vector signal(const Matrix& x) const;
};

Matrix standard_normal_matrix(Index n, Index p, RngStream& rng);

/// Features from N(0, I), stored signal, noise with variance phi / snr.
Dataset draw_dataset(const Dgp& dgp, Index n, double snr, RngStream& rng);
/// Fresh noise on a fixed design: response = signal + N(0, sigma2).
Dataset with_noise(const Matrix& x, const Vector& signal, double sigma2, RngStream& rng);

}  // namespace lf
