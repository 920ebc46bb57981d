#include "lf/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>

namespace lf {

TreeParams TreeParams::defaults(Index p) {
    TreeParams t;
    t.mtry = std::max<Index>(1, p / 3);
    t.min_node_size = 5;
    return t;
}

void TreeParams::validate(Index p) const {
    if (mtry < 1 || mtry > p)
        throw InvalidArgument("tree params: mtry must lie in [1, " + std::to_string(p) + "]");
    if (min_node_size < 1) throw InvalidArgument("tree params: min_node_size must be >= 1");
    if (max_leaf_nodes && *max_leaf_nodes < 2) throw InvalidArgument("tree params: max_leaf_nodes must be >= 2");
}

Index RegressionTree::leaf_count() const {
    return static_cast<Index>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

Index RegressionTree::internal_count() const { return nodes.size() - leaf_count(); }

double RegressionTree::predict(std::span<const double> x) const {
    std::int32_t k = 0;
    while (!nodes[static_cast<Index>(k)].is_leaf()) {
        const TreeNode& n = nodes[static_cast<Index>(k)];
        k = x[static_cast<Index>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<Index>(k)].value;
}

Vector TreePredictionMatrix::row_means() const {
    Vector m(values.rows());
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < values.cols(); ++j) s += values(i, j);
        m(i) = s / static_cast<double>(values.cols());
    }
    return m;
}

std::vector<Index> bootstrap_sample(Index n, RngStream& rng) {
    std::vector<Index> bag(n);
    for (auto& b : bag) b = rng.uniform_index(n);
    return bag;
}

std::vector<Index> out_of_bag(Index n, std::span<const Index> bag) {
    std::vector<char> seen(n, 0);
    for (Index i : bag) seen[i] = 1;
    std::vector<Index> oob;
    for (Index i = 0; i < n; ++i)
        if (!seen[i]) oob.push_back(i);
    return oob;
}

namespace {

struct SplitChoice {
    bool valid = false;
    std::int32_t feature = -1;
    double threshold = 0.0;
    double gain = 0.0;  // parent SSE minus children SSE
    Index left_size = 0;
};

struct PendingNode {
    std::int32_t id;
    Index begin;
    Index end;
    SplitChoice split;
};

class TreeGrower {
  public:
    TreeGrower(const Dataset& data, std::span<const Index> rows, const TreeParams& params, RngStream& rng)
        : data_(data), params_(params), rng_(rng), rows_(rows.begin(), rows.end()) {
        const Index p = data.cols();
        features_.resize(p);
        std::iota(features_.begin(), features_.end(), Index{0});
        scratch_.reserve(rows_.size());
    }

    RegressionTree grow() {
        RegressionTree tree;
        tree.nodes.push_back(make_leaf(0, rows_.size()));

        auto cmp = [](const PendingNode& a, const PendingNode& b) {
            if (a.split.gain != b.split.gain) return a.split.gain < b.split.gain;
            return a.id > b.id;
        };
        std::priority_queue<PendingNode, std::vector<PendingNode>, decltype(cmp)> queue(cmp);
        consider(queue, 0, 0, rows_.size());

        Index leaves = 1;
        const Index cap = params_.max_leaf_nodes.value_or(std::numeric_limits<Index>::max());
        while (!queue.empty() && leaves < cap) {
            PendingNode node = queue.top();
            queue.pop();
            const Index mid = partition(node.begin, node.end, node.split);
            const auto left_id = static_cast<std::int32_t>(tree.nodes.size());
            tree.nodes.push_back(make_leaf(node.begin, mid));
            const auto right_id = static_cast<std::int32_t>(tree.nodes.size());
            tree.nodes.push_back(make_leaf(mid, node.end));
            TreeNode& parent = tree.nodes[static_cast<Index>(node.id)];
            parent.feature = node.split.feature;
            parent.threshold = node.split.threshold;
            parent.left = left_id;
            parent.right = right_id;
            ++leaves;
            if (leaves >= cap) break;
            consider(queue, left_id, node.begin, mid);
            consider(queue, right_id, mid, node.end);
        }
        tree.in_bag = rows_original_;
        return tree;
    }

    void keep_bag(std::span<const Index> rows) { rows_original_.assign(rows.begin(), rows.end()); }

  private:
    double y(Index row) const { return data_.response(static_cast<Eigen::Index>(row)); }
    double x(Index row, Index f) const {
        return data_.features(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(f));
    }

    TreeNode make_leaf(Index begin, Index end) const {
        TreeNode n;
        double s = 0.0;
        for (Index k = begin; k < end; ++k) s += y(rows_[k]);
        n.value = end > begin ? s / static_cast<double>(end - begin) : 0.0;
        return n;
    }

    template <class Queue>
    void consider(Queue& queue, std::int32_t id, Index begin, Index end) {
        SplitChoice best = best_split(begin, end);
        if (best.valid) queue.push(PendingNode{id, begin, end, best});
    }

    SplitChoice best_split(Index begin, Index end) {
        SplitChoice best;
        const Index m = end - begin;
        if (m < 2 * params_.min_node_size) return best;
        double lo = y(rows_[begin]), hi = lo, total = 0.0, total_sq = 0.0;
        for (Index k = begin; k < end; ++k) {
            const double v = y(rows_[k]);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            total += v;
            total_sq += v * v;
        }
        if (lo == hi) return best;
        const double parent_sse = std::max(0.0, total_sq - total * total / static_cast<double>(m));

        // Partial Fisher-Yates draw of mtry candidates; evaluated in ascending
        // index order so ties resolve to the lowest feature.
        const Index p = features_.size();
        for (Index k = 0; k < params_.mtry; ++k) {
            const Index r = k + rng_.uniform_index(p - k);
            std::swap(features_[k], features_[r]);
        }
        std::vector<Index> candidates(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(params_.mtry));
        std::sort(candidates.begin(), candidates.end());

        const double base = total * total / static_cast<double>(m);
        double best_score = base;
        for (Index f : candidates) {
            scratch_.clear();
            for (Index k = begin; k < end; ++k) scratch_.emplace_back(x(rows_[k], f), y(rows_[k]));
            std::sort(scratch_.begin(), scratch_.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            double left_sum = 0.0;
            for (Index k = 1; k < m; ++k) {
                left_sum += scratch_[k - 1].second;
                if (k < params_.min_node_size || m - k < params_.min_node_size) continue;
                const double xl = scratch_[k - 1].first;
                const double xr = scratch_[k].first;
                if (!(xl < xr)) continue;
                const double right_sum = total - left_sum;
                // Maximizing this is equivalent to minimizing the children's SSE.
                const double score = left_sum * left_sum / static_cast<double>(k) +
                                     right_sum * right_sum / static_cast<double>(m - k);
                if (score > best_score) {
                    double thr = 0.5 * (xl + xr);
                    if (!(thr < xr)) thr = xl;
                    best_score = score;
                    best.valid = true;
                    best.feature = static_cast<std::int32_t>(f);
                    best.threshold = thr;
                    best.left_size = k;
                }
            }
        }
        if (!best.valid) return best;
        best.gain = best_score - base;
        if (!(best.gain > 1e-12 * std::max(parent_sse, 1e-300))) best.valid = false;
        return best;
    }

    Index partition(Index begin, Index end, const SplitChoice& split) {
        const auto f = static_cast<Index>(split.feature);
        auto first = rows_.begin() + static_cast<std::ptrdiff_t>(begin);
        auto last = rows_.begin() + static_cast<std::ptrdiff_t>(end);
        auto mid = std::stable_partition(first, last, [&](Index r) { return x(r, f) <= split.threshold; });
        return static_cast<Index>(mid - rows_.begin());
    }

    const Dataset& data_;
    const TreeParams& params_;
    RngStream& rng_;
    std::vector<Index> rows_;
    std::vector<Index> rows_original_;
    std::vector<Index> features_;
    std::vector<std::pair<double, double>> scratch_;
};

}  // namespace

RegressionTree fit_tree(const Dataset& data, std::span<const Index> rows, const TreeParams& params,
                        RngStream& rng) {
    if (rows.empty()) throw InvalidArgument("fit_tree: empty row set");
    for (Index r : rows)
        if (r >= data.rows()) throw InvalidArgument("fit_tree: row index out of range");
    params.validate(data.cols());
    TreeGrower grower(data, rows, params, rng);
    grower.keep_bag(rows);
    return grower.grow();
}

double predict_tree(const RegressionTree& tree, std::span<const double> x, Index n_features) {
    if (x.size() != n_features)
        throw InvalidArgument("predict_tree: expected " + std::to_string(n_features) + " features, got " +
                              std::to_string(x.size()));
    return tree.predict(x);
}

namespace {

RegressionTree grow_member(const Dataset& data, const TreeParams& params, const RngStream& rng, Index j) {
    RngStream stream = rng.child(j);
    const auto bag = bootstrap_sample(data.rows(), stream);
    return fit_tree(data, bag, params, stream);
}

Forest empty_forest(const Dataset& data, Index n_trees, const TreeParams& params, const RngStream& rng) {
    if (n_trees < 1) throw InvalidArgument("fit_forest: need at least one tree");
    data.validate();
    params.validate(data.cols());
    Forest f;
    f.trees.resize(n_trees);
    f.params = params;
    f.seed = mix_seed(rng.master_seed(), rng.stream_id());
    f.n_features = data.cols();
    f.n_train = data.rows();
    return f;
}

}  // namespace

Forest fit_forest(const Dataset& data, Index n_trees, const TreeParams& params, const RngStream& rng, Exec exec) {
    Forest f = empty_forest(data, n_trees, params, rng);
    parallel_for(n_trees, exec, [&](Index j) { f.trees[j] = grow_member(data, params, rng, j); });
    return f;
}

double forest_mean_predict(const Forest& forest, std::span<const double> x) {
    if (forest.trees.empty()) throw InvalidArgument("forest_mean_predict: empty forest");
    if (x.size() != forest.n_features) throw InvalidArgument("forest_mean_predict: dimension mismatch");
    double s = 0.0;
    for (const auto& t : forest.trees) s += t.predict(x);
    return s / static_cast<double>(forest.trees.size());
}

namespace {

void fill_oob_mask(const Forest& forest, TreePredictionMatrix& m, RowOrigin origin) {
    m.oob_mask.setConstant(m.values.rows(), m.values.cols(), true);
    if (origin == RowOrigin::held_out) return;
    if (static_cast<Index>(m.values.rows()) != forest.n_train)
        throw InvalidArgument("prediction_matrix: training-origin rows must match the forest's training size");
    for (Index j = 0; j < forest.size(); ++j)
        for (Index i : forest.trees[j].in_bag) m.oob_mask(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = false;
}

void check_width(const Forest& forest, const Matrix& features) {
    if (static_cast<Index>(features.cols()) != forest.n_features)
        throw InvalidArgument("prediction_matrix: expected " + std::to_string(forest.n_features) +
                              " feature columns, got " + std::to_string(features.cols()));
}

}  // namespace

TreePredictionMatrix prediction_matrix(const Forest& forest, const Matrix& features, RowOrigin origin, Exec exec) {
    check_width(forest, features);
    TreePredictionMatrix m;
    m.values.resize(features.rows(), static_cast<Eigen::Index>(forest.size()));
    const auto p = static_cast<Index>(features.cols());
    parallel_for(static_cast<Index>(features.rows()), exec, [&](Index i) {
        std::span<const double> x(features.data() + i * p, p);
        for (Index j = 0; j < forest.size(); ++j)
            m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = forest.trees[j].predict(x);
    });
    fill_oob_mask(forest, m, origin);
    return m;
}

OobPredictions oob_predictions(const Forest& forest, const Dataset& data, Exec exec) {
    if (data.rows() != forest.n_train) throw InvalidArgument("oob_predictions: data is not the training data");
    const auto m = prediction_matrix(forest, data.features, RowOrigin::training, exec);
    OobPredictions out;
    out.values.resize(data.rows());
    Index covered = 0;
    for (Index i = 0; i < data.rows(); ++i) {
        double s = 0.0;
        Index k = 0;
        for (Index j = 0; j < forest.size(); ++j) {
            if (m.oob_mask(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) {
                s += m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                ++k;
            }
        }
        if (k > 0) {
            out.values[i] = s / static_cast<double>(k);
            ++covered;
        }
    }
    out.coverage = data.rows() ? static_cast<double>(covered) / static_cast<double>(data.rows()) : 0.0;
    return out;
}

Eigen::MatrixXi split_counts(const Forest& forest) {
    Eigen::MatrixXi c = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(forest.n_features),
                                              static_cast<Eigen::Index>(forest.size()));
    for (Index j = 0; j < forest.size(); ++j)
        for (const auto& n : forest.trees[j].nodes)
            if (!n.is_leaf()) ++c(n.feature, static_cast<Eigen::Index>(j));
    return c;
}

namespace serial {

Forest fit_forest(const Dataset& data, Index n_trees, const TreeParams& params, const RngStream& rng) {
    Forest f = empty_forest(data, n_trees, params, rng);
    for (Index j = 0; j < n_trees; ++j) f.trees[j] = grow_member(data, params, rng, j);
    return f;
}

TreePredictionMatrix prediction_matrix(const Forest& forest, const Matrix& features, RowOrigin origin) {
    check_width(forest, features);
    TreePredictionMatrix m;
    m.values.resize(features.rows(), static_cast<Eigen::Index>(forest.size()));
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        std::span<const double> x(features.row(i).data(), static_cast<Index>(features.cols()));
        for (Index j = 0; j < forest.size(); ++j) m.values(i, static_cast<Eigen::Index>(j)) = forest.trees[j].predict(x);
    }
    fill_oob_mask(forest, m, origin);
    return m;
}

}  // namespace serial
}  // namespace lf
