#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "helpers.hpp"
#include "lf/forest.hpp"

using namespace lf;

namespace {

struct RootSplit {
    Index feature = 0;
    double threshold = 0.0;
    double sse = 0.0;
};

// Exhaustive search over every feature and every midpoint between distinct values.
RootSplit brute_force_root(const Dataset& d, Index min_node) {
    RootSplit best;
    best.sse = 1e300;
    const Index n = d.rows();
    for (Index f = 0; f < d.cols(); ++f) {
        std::vector<double> xs;
        for (Index i = 0; i < n; ++i) xs.push_back(d.features(i, f));
        std::sort(xs.begin(), xs.end());
        xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
        for (Index k = 0; k + 1 < xs.size(); ++k) {
            const double t = 0.5 * (xs[k] + xs[k + 1]);
            double sl = 0, sr = 0, ql = 0, qr = 0;
            Index nl = 0, nr = 0;
            for (Index i = 0; i < n; ++i) {
                const double y = d.response(i);
                if (d.features(i, f) <= t) sl += y, ql += y * y, ++nl;
                else sr += y, qr += y * y, ++nr;
            }
            if (nl < min_node || nr < min_node) continue;
            const double sse = (ql - sl * sl / nl) + (qr - sr * sr / nr);
            if (sse < best.sse - 1e-12) best = {f, t, sse};
        }
    }
    return best;
}

Index leaf_of(const RegressionTree& t, std::span<const double> x) {
    std::int32_t k = 0;
    while (!t.nodes[k].is_leaf()) k = x[t.nodes[k].feature] <= t.nodes[k].threshold ? t.nodes[k].left : t.nodes[k].right;
    return static_cast<Index>(k);
}

std::vector<Index> iota_rows(Index n) {
    std::vector<Index> r(n);
    for (Index i = 0; i < n; ++i) r[i] = i;
    return r;
}

}  // namespace

TEST_SUITE("forest") {

TEST_CASE("step function gives a single split between the straddling points") {
    Dataset d;
    const std::vector<double> xs{-2.0, -1.5, -1.0, -0.7, -0.4, -0.3, -0.1, 0.2, 0.5, 0.9, 1.1, 1.4, 1.8, 2.5};
    d.features.resize(xs.size(), 1);
    d.response.resize(xs.size());
    for (Index i = 0; i < xs.size(); ++i) {
        d.features(i, 0) = xs[i];
        d.response(i) = xs[i] > 0 ? 1.0 : 0.0;
    }
    RngStream rng(1, 0);
    TreeParams tp{1, 1, std::nullopt};
    auto tree = fit_tree(d, iota_rows(d.rows()), tp, rng);
    REQUIRE(tree.nodes.size() == 3);
    CHECK(tree.nodes[0].feature == 0);
    CHECK(tree.nodes[0].threshold == doctest::Approx(0.05));
    CHECK(tree.nodes[tree.nodes[0].left].value == 0.0);
    CHECK(tree.nodes[tree.nodes[0].right].value == 1.0);
}

TEST_CASE("root split matches exhaustive search when every feature is a candidate") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Dataset d = test::toy_data(40, 4, seed);
        RngStream rng(seed, 1);
        TreeParams tp{4, 3, Index{2}};
        auto tree = fit_tree(d, iota_rows(d.rows()), tp, rng);
        auto oracle = brute_force_root(d, 3);
        CHECK(static_cast<Index>(tree.nodes[0].feature) == oracle.feature);
        CHECK(tree.nodes[0].threshold == doctest::Approx(oracle.threshold).epsilon(1e-12));
        CHECK(tree.leaf_count() == 2);
    }
}

TEST_CASE("leaves hold the mean of their bag rows and respect the minimum size") {
    Dataset d = test::toy_data(120, 5, 3);
    RngStream rng(3, 0);
    auto bag = bootstrap_sample(d.rows(), rng);
    TreeParams tp{2, 4, std::nullopt};
    auto tree = fit_tree(d, bag, tp, rng);
    CHECK(tree.in_bag == bag);

    std::map<Index, std::pair<double, Index>> acc;
    for (Index i : bag) {
        auto& a = acc[leaf_of(tree, d.row(i))];
        a.first += d.response(i);
        a.second += 1;
    }
    CHECK(acc.size() == tree.leaf_count());
    for (auto& [leaf, a] : acc) {
        CHECK(tree.nodes[leaf].value == doctest::Approx(a.first / a.second).epsilon(1e-12));
        CHECK(a.second >= 4);
    }
}

TEST_CASE("leaf cap is honored") {
    Dataset d = test::toy_data(200, 3, 4);
    for (Index cap : {2, 3, 7, 16}) {
        RngStream rng(4, cap);
        TreeParams tp{3, 1, cap};
        auto tree = fit_tree(d, iota_rows(d.rows()), tp, rng);
        CHECK(tree.leaf_count() == cap);
        CHECK(tree.internal_count() == cap - 1);
    }
}

TEST_CASE("bagging helpers") {
    RngStream rng(5, 0);
    auto bag = bootstrap_sample(30, rng);
    CHECK(bag.size() == 30);
    auto oob = out_of_bag(30, bag);
    std::set<Index> in(bag.begin(), bag.end());
    CHECK(in.size() + oob.size() == 30);
    for (Index i : oob) CHECK(!in.count(i));
    CHECK(std::is_sorted(oob.begin(), oob.end()));
}

TEST_CASE("OOB predictions match a per-tree oracle built from the bags") {
    Dataset d = test::toy_data(60, 3, 6);
    auto forest = fit_forest(d, 25, TreeParams::defaults(3), RngStream(6, 0));
    auto oob = oob_predictions(forest, d);
    Index covered = 0;
    for (Index i = 0; i < d.rows(); ++i) {
        double s = 0;
        Index c = 0;
        for (const auto& t : forest.trees) {
            if (std::find(t.in_bag.begin(), t.in_bag.end(), i) != t.in_bag.end()) continue;
            s += t.predict(d.row(i));
            ++c;
        }
        if (c == 0) {
            CHECK(!oob.values[i].has_value());
        } else {
            ++covered;
            REQUIRE(oob.values[i].has_value());
            CHECK(*oob.values[i] == doctest::Approx(s / c).epsilon(1e-12));
        }
    }
    CHECK(oob.coverage == doctest::Approx(static_cast<double>(covered) / d.rows()));
}

TEST_CASE("prediction matrix masks and row means") {
    Dataset d = test::toy_data(50, 4, 7);
    auto forest = fit_forest(d, 12, TreeParams::defaults(4), RngStream(7, 0));
    auto tm = prediction_matrix(forest, d.features, RowOrigin::training);
    auto hm = prediction_matrix(forest, d.features, RowOrigin::held_out);
    CHECK(hm.oob_mask.all());
    for (Index j = 0; j < forest.size(); ++j) {
        auto oob = out_of_bag(d.rows(), forest.trees[j].in_bag);
        std::set<Index> o(oob.begin(), oob.end());
        for (Index i = 0; i < d.rows(); ++i) {
            CHECK(tm.oob_mask(i, j) == (o.count(i) == 1));
            CHECK(tm.values(i, j) == forest.trees[j].predict(d.row(i)));
        }
    }
    auto means = tm.row_means();
    for (Index i = 0; i < d.rows(); ++i) CHECK(means(i) == doctest::Approx(forest_mean_predict(forest, d.row(i))));
}

TEST_CASE("OpenMP kernels equal the serial reference bit for bit") {
    Dataset d = test::toy_data(150, 6, 8);
    const RngStream rng(8, 0);
    auto ref = serial::fit_forest(d, 30, TreeParams::defaults(6), rng);
    for (int w : {1, 2, 4}) {
        auto par = fit_forest(d, 30, TreeParams::defaults(6), rng, Exec{w});
        REQUIRE(par.size() == ref.size());
        for (Index j = 0; j < ref.size(); ++j) {
            REQUIRE(par.trees[j].nodes.size() == ref.trees[j].nodes.size());
            CHECK(par.trees[j].in_bag == ref.trees[j].in_bag);
            for (Index k = 0; k < ref.trees[j].nodes.size(); ++k) {
                CHECK(par.trees[j].nodes[k].feature == ref.trees[j].nodes[k].feature);
                CHECK(par.trees[j].nodes[k].threshold == ref.trees[j].nodes[k].threshold);
                CHECK(par.trees[j].nodes[k].value == ref.trees[j].nodes[k].value);
            }
        }
        auto a = serial::prediction_matrix(ref, d.features, RowOrigin::training);
        auto b = prediction_matrix(par, d.features, RowOrigin::training, Exec{w});
        CHECK(a.values == b.values);
        CHECK((a.oob_mask == b.oob_mask).all());
    }
}

TEST_CASE("split counts tally internal nodes per feature") {
    Dataset d = test::toy_data(80, 5, 9);
    auto forest = fit_forest(d, 10, TreeParams::defaults(5), RngStream(9, 0));
    auto counts = split_counts(forest);
    REQUIRE(counts.rows() == 5);
    REQUIRE(counts.cols() == 10);
    for (Index j = 0; j < 10; ++j) {
        std::vector<int> c(5, 0);
        for (const auto& n : forest.trees[j].nodes)
            if (!n.is_leaf()) ++c[n.feature];
        for (Index s = 0; s < 5; ++s) CHECK(counts(s, j) == c[s]);
        CHECK(static_cast<Index>(counts.col(j).sum()) == forest.trees[j].internal_count());
    }
}

TEST_CASE("parameter and shape validation") {
    CHECK(TreeParams::defaults(50).mtry == 16);
    CHECK(TreeParams::defaults(2).mtry == 1);
    CHECK_THROWS_AS(TreeParams({0, 5, std::nullopt}).validate(3), InvalidArgument);
    CHECK_THROWS_AS(TreeParams({4, 5, std::nullopt}).validate(3), InvalidArgument);
    CHECK_THROWS_AS(TreeParams({1, 5, Index{1}}).validate(3), InvalidArgument);

    Dataset d = test::toy_data(30, 3, 10);
    auto forest = fit_forest(d, 3, TreeParams::defaults(3), RngStream(10, 0));
    Matrix wrong = Matrix::Zero(5, 2);
    CHECK_THROWS(prediction_matrix(forest, wrong, RowOrigin::held_out));
}

}
