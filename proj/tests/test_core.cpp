#include <doctest.h>

#include <sstream>
#include <stdexcept>
#include <vector>

#include "helpers.hpp"
#include "lf/core.hpp"
#include "lf/csv.hpp"
#include "lf/parallel.hpp"

using namespace lf;

TEST_SUITE("core") {

TEST_CASE("rng streams are pure functions of their key") {
    RngStream a(7, 3), b(7, 3), c(7, 4);
    std::vector<std::uint64_t> va, vb, vc;
    for (int i = 0; i < 16; ++i) {
        va.push_back(a.next_u64());
        vb.push_back(b.next_u64());
        vc.push_back(c.next_u64());
    }
    CHECK(va == vb);
    CHECK(va != vc);

    // child() does not depend on how far the parent has advanced
    RngStream p1(11, 0), p2(11, 0);
    for (int i = 0; i < 100; ++i) p2.uniform();
    RngStream k1 = p1.child(5), k2 = p2.child(5);
    for (int i = 0; i < 8; ++i) CHECK(k1.next_u64() == k2.next_u64());
    CHECK(p1.child(5).next_u64() != p1.child(6).next_u64());
}

TEST_CASE("uniform and index draws stay in range") {
    RngStream r(1, 1);
    for (int i = 0; i < 10000; ++i) {
        const double u = r.uniform();
        CHECK((u >= 0.0 && u < 1.0));
        CHECK(r.uniform_index(7) < 7);
    }
}

TEST_CASE("sample moments match hand values") {
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    CHECK(sample_mean(x) == doctest::Approx(2.5));
    CHECK(sample_variance(x) == doctest::Approx(5.0 / 3.0));
    CHECK(sample_sd(x) == doctest::Approx(std::sqrt(5.0 / 3.0)));
    CHECK(sample_variance(std::vector<double>{3.0}) == 0.0);
}

TEST_CASE("response standardization and its inverse") {
    Dataset d = test::toy_data(50, 3, 1);
    auto [s, t] = standardize_response(d);
    std::span<const double> z(s.response.data(), s.rows());
    CHECK(std::abs(sample_mean(z)) < 1e-12);
    CHECK(sample_sd(z) == doctest::Approx(1.0).epsilon(1e-12));
    for (Index i = 0; i < d.rows(); ++i) CHECK(t.invert(s.response(i)) == doctest::Approx(d.response(i)));

    d.response.setConstant(3.0);
    CHECK_THROWS_AS(standardize_response(d), DegenerateError);
}

TEST_CASE("dataset validation and subset") {
    Dataset d = test::toy_data(10, 2, 2);
    CHECK_NOTHROW(d.validate());
    const std::vector<Index> rows{3, 3, 0};
    Dataset s = d.subset(rows);
    CHECK(s.rows() == 3);
    CHECK(s.response(0) == d.response(3));
    CHECK(s.response(1) == d.response(3));
    CHECK(s.features(2, 1) == d.features(0, 1));

    Dataset bad = d;
    bad.response.resize(9);
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = d;
    bad.features(0, 0) = std::nan("");
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("snr spec") {
    auto s = SnrSpec::from_signal_variance(2.0, 4.0);
    CHECK(s.sigma2 == doctest::Approx(0.5));
}

TEST_CASE("parallel_for rethrows the lowest failing index") {
    for (int w : {1, 4}) {
        std::vector<int> hit(20, 0);
        try {
            parallel_for(20, Exec{w}, [&](std::size_t i) {
                hit[i] = 1;
                if (i == 5 || i == 13) throw std::runtime_error("boom " + std::to_string(i));
            });
            FAIL("no exception");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()) == "boom 5");
        }
    }
    std::vector<double> out(100);
    parallel_for(100, Exec{3}, [&](std::size_t i) { out[i] = static_cast<double>(i * i); });
    for (std::size_t i = 0; i < 100; ++i) CHECK(out[i] == static_cast<double>(i * i));
}

TEST_CASE("csv round trip is exact") {
    Dataset d = test::toy_data(12, 3, 3);
    d.signal = d.response * 0.5;
    std::stringstream ss;
    csv::write_dataset(ss, d, "target");
    auto table = csv::read_table(ss);
    Dataset back = csv::to_dataset(table, "target");
    CHECK(back.feature_names == d.feature_names);
    CHECK(back.features == d.features);
    CHECK(back.response == d.response);
    REQUIRE(back.signal.has_value());
    CHECK(*back.signal == *d.signal);

    Matrix picked = csv::select_features(table, {"x3", "x1"});
    CHECK(picked(4, 0) == d.features(4, 2));
    CHECK(picked(4, 1) == d.features(4, 0));
    CHECK_THROWS(csv::select_features(table, {"nope"}));
}

TEST_CASE("csv rejects non-numeric cells and missing response") {
    std::stringstream bad("a,y\n1,2\nx,3\n");
    CHECK_THROWS_AS(csv::read_table(bad), csv::ParseError);
    std::stringstream ok("a,b\n1,2\n3,4\n");
    auto t = csv::read_table(ok);
    CHECK_THROWS(csv::to_dataset(t, "y"));
}

TEST_CASE("format_double round-trips") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.125, 0.0}) {
        CHECK(std::stod(csv::format_double(v)) == v);
    }
}

}
