#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lf/core.hpp"
#include "lf/parallel.hpp"

namespace lf {

struct TreeParams {
    Index mtry = 1;
    Index min_node_size = 5;
    std::optional<Index> max_leaf_nodes;

    /// mtry = max(1, floor(p / 3)), min_node_size = 5, no leaf cap.
    static TreeParams defaults(Index p);
    void validate(Index p) const;
};

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;

    bool is_leaf() const { return feature < 0; }
};

/// CART regression tree stored as a flat node array rooted at node 0.
/// Routing: x[feature] <= threshold goes left.
struct RegressionTree {
    std::vector<TreeNode> nodes;
    std::vector<Index> in_bag;  // training rows, with multiplicity

    Index leaf_count() const;
    Index internal_count() const;
    double predict(std::span<const double> x) const;
};

struct Forest {
    std::vector<RegressionTree> trees;
    TreeParams params;
    std::uint64_t seed = 0;
    Index n_features = 0;
    Index n_train = 0;

    Index size() const { return trees.size(); }
};

/// Row-major n x J values with the matching out-of-bag mask.
struct TreePredictionMatrix {
    Matrix values;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> oob_mask;

    Index rows() const { return static_cast<Index>(values.rows()); }
    Index trees() const { return static_cast<Index>(values.cols()); }
    /// Plain row mean over all trees.
    Vector row_means() const;
};

/// Whether prediction rows are the forest's own training rows (OOB mask from
/// the bags) or rows the forest never saw (mask all true).
enum class RowOrigin { training, held_out };

std::vector<Index> bootstrap_sample(Index n, RngStream& rng);
/// Rows of [0, n) absent from `bag`, ascending.
std::vector<Index> out_of_bag(Index n, std::span<const Index> bag);

RegressionTree fit_tree(const Dataset& data, std::span<const Index> rows, const TreeParams& params,
                        RngStream& rng);

double predict_tree(const RegressionTree& tree, std::span<const double> x, Index n_features);

/// Tree j draws its bag and split candidates from rng.child(j).
Forest fit_forest(const Dataset& data, Index n_trees, const TreeParams& params, const RngStream& rng,
                  Exec exec = Exec::serial());

double forest_mean_predict(const Forest& forest, std::span<const double> x);

struct OobPredictions {
    std::vector<std::optional<double>> values;
    double coverage = 0.0;
};

/// Requires the forest's own training data.
OobPredictions oob_predictions(const Forest& forest, const Dataset& data, Exec exec = Exec::serial());

TreePredictionMatrix prediction_matrix(const Forest& forest, const Matrix& features, RowOrigin origin,
                                       Exec exec = Exec::serial());

/// p x J matrix; entry (s, j) counts internal nodes of tree j splitting on feature s.
Eigen::MatrixXi split_counts(const Forest& forest);

/// Serial reference kernels. Kept independent of the OpenMP path so tests and
/// the benchmark can compare the two bit-for-bit.
namespace serial {
Forest fit_forest(const Dataset& data, Index n_trees, const TreeParams& params, const RngStream& rng);
TreePredictionMatrix prediction_matrix(const Forest& forest, const Matrix& features, RowOrigin origin);
}  // namespace serial

}  // namespace lf
