#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "lf/simgen.hpp"

using namespace lf;

TEST_SUITE("simgen") {

TEST_CASE("analytic signal variance by hand") {
    PolyDgpSpec s;
    s.p = 3;
    s.alpha = Vector::Zero(3);
    s.beta = Matrix::Zero(3, 3);
    s.alpha << 0.1, 0.1, 0.0;
    CHECK(analytic_signal_variance(s) == doctest::Approx(0.02));
    s.beta(0, 2) = 0.1;
    s.beta(2, 0) = 5.0;  // lower triangle is ignored
    CHECK(analytic_signal_variance(s) == doctest::Approx(0.03));
}

TEST_CASE("polynomial signal evaluates the defining sum") {
    PolyDgpSpec s;
    s.p = 3;
    s.alpha = Vector::Zero(3);
    s.beta = Matrix::Zero(3, 3);
    s.alpha << 0.1, 0.05, 0.0;
    s.beta(0, 1) = 0.08;
    s.beta(1, 2) = 0.02;
    Matrix x(2, 3);
    x << 1.0, 2.0, 3.0, -1.0, 0.5, 4.0;
    Vector g = polynomial_signal(s, x);
    CHECK(g(0) == doctest::Approx(0.1 + 0.1 + 0.16 + 0.12));
    CHECK(g(1) == doctest::Approx(-0.1 + 0.025 - 0.04 + 0.04));
}

TEST_CASE("signal variance agrees with a large Monte Carlo sample") {
    PolyDgpSpec s;
    s.p = 8;
    RngStream rng(1, 0);
    draw_poly_coefficients(s, rng);
    CHECK_NOTHROW(s.validate());
    RngStream xr(1, 1);
    Matrix x = standard_normal_matrix(1000000, 8, xr);
    Vector g = polynomial_signal(s, x);
    const double mc = sample_variance({g.data(), static_cast<Index>(g.size())});
    CHECK(std::abs(mc / analytic_signal_variance(s) - 1.0) < 0.01);
}

TEST_CASE("coefficient draws respect the cap and sparsity") {
    PolyDgpSpec s;
    s.p = 40;
    s.c = 0.2;
    s.pi = 0.3;
    RngStream rng(2, 0);
    draw_poly_coefficients(s, rng);
    Index nz = 0, total = 0;
    for (Index j = 0; j < 40; ++j) {
        CHECK((s.alpha(j) == 0.0 || (s.alpha(j) > 0.0 && s.alpha(j) <= 0.2)));
        nz += s.alpha(j) != 0.0;
        ++total;
        for (Index k = j + 1; k < 40; ++k) {
            CHECK((s.beta(j, k) == 0.0 || (s.beta(j, k) > 0.0 && s.beta(j, k) <= 0.2)));
            nz += s.beta(j, k) != 0.0;
            ++total;
        }
    }
    CHECK(static_cast<double>(nz) / total == doctest::Approx(0.3).epsilon(0.1));
}

TEST_CASE("noise variance is phi over snr") {
    PolyDgpSpec s;
    s.p = 5;
    s.n = 40000;
    s.snr = 2.0;
    RngStream rng(3, 0);
    Dataset d = gen_polynomial(s, rng);
    REQUIRE(d.signal.has_value());
    Vector e = d.response - *d.signal;
    RngStream again(3, 0);
    PolyDgpSpec s2 = s;
    RngStream crng = again;
    draw_poly_coefficients(s2, crng);
    const double phi = analytic_signal_variance(s2);
    const double var = sample_variance({e.data(), static_cast<Index>(e.size())});
    CHECK(std::abs(var / (phi / 2.0) - 1.0) < 0.05);
}

TEST_CASE("noise calibration uses the sample variance") {
    Vector g(4);
    g << 1.0, 2.0, 3.0, 4.0;
    CHECK(calibrate_noise(g, 2.0) == doctest::Approx((5.0 / 3.0) / 2.0));
    Vector flat = Vector::Constant(5, 1.0);
    CHECK_THROWS_AS(calibrate_noise(flat, 1.0), DegenerateError);
}

TEST_CASE("fixed support spec") {
    auto s = fixed_support_spec(100, 10, 5, 0.1, 1.0);
    CHECK(s.alpha.head(5).isConstant(0.1));
    CHECK(s.alpha.tail(5).isZero());
    CHECK(s.beta.isZero());
    CHECK(analytic_signal_variance(s) == doctest::Approx(0.05));
}

TEST_CASE("tree DGP columns follow the chained recursion") {
    TreeDgpSpec s;
    s.n = 200;
    s.p = 6;
    s.rho = 0.5;
    s.phi_sample = 20000;
    RngStream rng(4, 0);
    TreeDgp dgp = build_tree_dgp(s, rng);
    REQUIRE(dgp.base.size() == 6);
    for (const auto& t : dgp.base) CHECK(t.leaf_count() <= 5);
    RngStream xr(4, 1);
    Matrix x = standard_normal_matrix(50, 6, xr);
    Matrix t = dgp.tree_columns(x);
    for (Index i = 0; i < 50; ++i) {
        double prev = 0.0;
        for (Index j = 0; j < 6; ++j) {
            const double v = dgp.base[j].predict(std::span<const double>(x.row(i).data(), 6)) + (j ? 0.5 * prev : 0.0);
            CHECK(t(i, j) == doctest::Approx(v).epsilon(1e-14));
            prev = v;
        }
    }
    CHECK(test::max_abs_diff(dgp.signal(x), t * dgp.spec.beta) < 1e-14);
    CHECK(dgp.phi > 0.0);
}

TEST_CASE("a one-hot beta picks out one chained column") {
    TreeDgpSpec s;
    s.n = 200;
    s.p = 4;
    s.rho = 0.0;
    s.c = 1.0;
    s.beta = Vector::Zero(4);
    s.beta(2) = 1.0;
    s.phi_sample = 5000;
    RngStream rng(5, 0);
    TreeDgp dgp = build_tree_dgp(s, rng);
    RngStream xr(5, 1);
    Matrix x = standard_normal_matrix(20, 4, xr);
    Vector g = dgp.signal(x);
    for (Index i = 0; i < 20; ++i) CHECK(g(i) == dgp.base[2].predict(std::span<const double>(x.row(i).data(), 4)));
}

TEST_CASE("the common interface dispatches to either generator") {
    auto poly = fixed_support_spec(50, 6, 2, 0.1, 1.0);
    Dgp a{poly};
    CHECK(a.p() == 6);
    CHECK(a.phi() == doctest::Approx(0.02));
    RngStream rng(6, 0);
    Dataset d = draw_dataset(a, 30, 4.0, rng);
    CHECK(d.rows() == 30);
    CHECK(d.feature_names.size() == 6);
    CHECK(d.feature_names[0] == "x1");
    CHECK_THROWS_AS(draw_dataset(a, 30, 0.0, rng), InvalidArgument);
}

TEST_CASE("generators are deterministic and validate inputs") {
    PolyDgpSpec s;
    s.p = 5;
    s.n = 20;
    RngStream a(7, 0), b(7, 0);
    CHECK(gen_polynomial(s, a).response == gen_polynomial(s, b).response);
    PolyDgpSpec bad = s;
    bad.pi = 1.5;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    TreeDgpSpec t;
    t.rho = 2.0;
    CHECK_THROWS_AS(t.validate(), InvalidArgument);
}

}
