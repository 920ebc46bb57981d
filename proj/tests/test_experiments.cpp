#include <doctest.h>

#include <cmath>
#include <sstream>

#include "lf/experiments.hpp"

using namespace lf;
using namespace lf::experiments;

namespace {

SweepConfig tiny_config(DgpKind kind = DgpKind::polynomial) {
    SweepConfig c;
    c.dgp = kind;
    c.poly.n = c.tree.n = 80;
    c.poly.p = c.tree.p = 5;
    c.tree.phi_sample = 5000;
    c.snr_grid = {1.0, 4.0};
    c.replications = 2;
    c.test_size = 50;
    c.fit.n_trees = 20;
    c.fit.n_lambda = 20;
    return c;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("summary statistics") {
    auto s = summarize({1.0, 2.0, 3.0, 4.0});
    CHECK(s.mean == doctest::Approx(2.5));
    CHECK(s.se == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
    CHECK(s.count == 4);
}

TEST_CASE("a study yields one record per snr, replication and method") {
    auto cfg = tiny_config();
    StudyOptions o;
    o.keep_predictions = true;
    auto st = run_study(cfg, RngStream(1, 0), o);
    REQUIRE(st.records.size() == 12);
    for (Index si = 0; si < 2; ++si)
        for (Index r = 0; r < 2; ++r)
            for (Method m : kMethods) {
                const auto& rec = st.at(si, r, m);
                CHECK(rec.snr == cfg.snr_grid[si]);
                CHECK(rec.rep == r);
                CHECK(rec.method == m);
                CHECK(rec.test_mse > 0.0);
            }
    CHECK(st.at(0, 0, Method::vanilla).theta_hat == 0.0);
    CHECK(st.at(0, 0, Method::post_selection).theta_hat == 1.0);
    CHECK(st.sigma2[0] == doctest::Approx(4.0 * st.sigma2[1]));
    REQUIRE(st.predictions.size() == 2);
    CHECK(st.predictions[0][0].rows() == 2);
    CHECK(st.predictions[0][0].cols() == 50);

    // signal_mse recomputed from the stored predictions
    const Vector e = st.predictions[1][2].row(1).transpose() - st.test_signal;
    CHECK(st.at(1, 1, Method::lassoed).signal_mse == doctest::Approx(e.squaredNorm() / 50.0).epsilon(1e-12));
}

TEST_CASE("studies are deterministic across worker counts") {
    auto cfg = tiny_config(DgpKind::tree);
    auto a = run_study(cfg, RngStream(2, 0), {}, Exec{1});
    auto b = run_study(cfg, RngStream(2, 0), {}, Exec{3});
    REQUIRE(a.records.size() == b.records.size());
    for (Index k = 0; k < a.records.size(); ++k) {
        CHECK(a.records[k].test_mse == b.records[k].test_mse);
        CHECK(a.records[k].est_error == b.records[k].est_error);
    }
}

TEST_CASE("decomposition by hand and with a constant predictor") {
    Matrix p(2, 1);
    p << 1.0, 3.0;
    Vector g = Vector::Zero(1);
    auto row = decompose(p, g);
    CHECK(row.bias2 == doctest::Approx(4.0));
    CHECK(row.variance == doctest::Approx(1.0));
    CHECK(row.mse_signal == doctest::Approx(5.0));
    CHECK(row.identity_gap < 1e-12);

    Matrix c = Matrix::Constant(5, 3, 2.0);
    Vector s(3);
    s << 1.0, 2.0, 4.0;
    auto r2 = decompose(c, s);
    CHECK(r2.variance == 0.0);
    CHECK(r2.bias2 == doctest::Approx(5.0 / 3.0));
    CHECK(r2.mse_signal_se == 0.0);
    CHECK_THROWS_AS(decompose(c, Vector::Zero(2)), InvalidArgument);
}

TEST_CASE("sign agreement counts matching orderings") {
    const std::vector<double> ta{1.0, 2.0, 3.0}, tb{2.0, 1.0, 3.5};
    auto perfect = sign_agreement(ta, tb, ta, tb);
    CHECK(perfect.rate == 1.0);
    CHECK(perfect.agree == 3);
    auto flipped = sign_agreement(tb, ta, ta, tb);
    CHECK(flipped.rate == 0.0);
    CHECK_THROWS_AS(sign_agreement({}, {}, {}, {}), InvalidArgument);
}

TEST_CASE("recovery score") {
    Vector k(4);
    k << 0.4, 0.3, 0.2, 0.1;
    CHECK(recovery_score(k, 2) == doctest::Approx(0.7));
    CHECK(recovery_score(k, 4) == doctest::Approx(1.0));
}

TEST_CASE("with every feature in the support recovery is one") {
    auto cfg = tiny_config(DgpKind::fixed_support);
    cfg.support = 5;
    auto rep = importance_recovery(cfg, RngStream(3, 0));
    REQUIRE(rep.rows.size() == 6);
    for (const auto& r : rep.rows) {
        if (r.recovery.count == 0) continue;
        CHECK(r.recovery.mean == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK_THROWS_AS(importance_recovery(tiny_config(), RngStream(3, 0)), InvalidArgument);
}

TEST_CASE("report files carry provenance and the documented headers") {
    auto cfg = tiny_config();
    auto sweep = snr_sweep(cfg, RngStream(4, 0));
    CHECK(sweep.aggregates.size() == 6);
    CHECK(sweep.find(4.0, Method::lassoed).test_mse.count == 2);

    std::ostringstream a;
    write_provenance(a, {"abc", 7, "0.1.0"});
    write_sweep_csv(a, sweep);
    const std::string s = a.str();
    CHECK(s.rfind("# config_hash=abc\n", 0) == 0);
    CHECK(s.find("snr,rep,method,test_mse,signal_mse,theta_hat,est_error\n") != std::string::npos);

    auto acc = error_accuracy_report(run_study(cfg, RngStream(4, 0)));
    std::ostringstream sc, ag;
    write_scatter_csv(sc, acc);
    write_agreement_csv(ag, acc);
    CHECK(first_line(sc.str()) == "true_err,est_err,method,snr,rep");
    CHECK(first_line(ag.str()) == "snr,vanilla_estimate,agree,total,rate");
    CHECK(acc.agreement.size() == 2);
}

TEST_CASE("config validation") {
    auto c = tiny_config();
    c.snr_grid = {2.0, 1.0};
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = tiny_config();
    c.replications = 1;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = tiny_config(DgpKind::fixed_support);
    c.support = 9;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    CHECK_THROWS_AS(bias_variance_decomposition(tiny_config(), RngStream(5, 0)), InvalidArgument);
}

}
