#include "lf/io.hpp"

#include <fstream>
#include <sstream>

namespace lf::io {

namespace {

template <class T>
T get(const Json& j, const char* key) {
    if (!j.contains(key)) throw FormatError(std::string("model json: missing key '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model json: bad value for '") + key + "': " + e.what());
    }
}

Json vector_json(const Vector& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Vector vector_from(const std::vector<double>& v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (Index i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
    return out;
}

}  // namespace

Json forest_to_json(const Forest& forest) {
    Json j;
    j["n_features"] = forest.n_features;
    j["n_train"] = forest.n_train;
    j["seed"] = forest.seed;
    j["params"] = {{"mtry", forest.params.mtry},
                   {"min_node_size", forest.params.min_node_size},
                   {"max_leaf_nodes", forest.params.max_leaf_nodes ? Json(*forest.params.max_leaf_nodes) : Json()}};
    Json trees = Json::array();
    for (const auto& t : forest.trees) {
        std::vector<std::int32_t> feature, left, right;
        std::vector<double> threshold, value;
        for (const auto& n : t.nodes) {
            feature.push_back(n.feature);
            threshold.push_back(n.threshold);
            left.push_back(n.left);
            right.push_back(n.right);
            value.push_back(n.value);
        }
        trees.push_back({{"feature", feature},
                         {"threshold", threshold},
                         {"left", left},
                         {"right", right},
                         {"value", value},
                         {"in_bag", t.in_bag}});
    }
    j["trees"] = std::move(trees);
    return j;
}

Forest forest_from_json(const Json& j) {
    Forest f;
    f.n_features = get<Index>(j, "n_features");
    f.n_train = get<Index>(j, "n_train");
    f.seed = get<std::uint64_t>(j, "seed");
    const Json& p = j.at("params");
    f.params.mtry = get<Index>(p, "mtry");
    f.params.min_node_size = get<Index>(p, "min_node_size");
    if (p.contains("max_leaf_nodes") && !p.at("max_leaf_nodes").is_null())
        f.params.max_leaf_nodes = get<Index>(p, "max_leaf_nodes");
    for (const auto& t : j.at("trees")) {
        const auto feature = get<std::vector<std::int32_t>>(t, "feature");
        const auto threshold = get<std::vector<double>>(t, "threshold");
        const auto left = get<std::vector<std::int32_t>>(t, "left");
        const auto right = get<std::vector<std::int32_t>>(t, "right");
        const auto value = get<std::vector<double>>(t, "value");
        const Index n = feature.size();
        if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n || n == 0)
            throw FormatError("model json: tree node arrays differ in length");
        RegressionTree tree;
        for (Index k = 0; k < n; ++k) {
            TreeNode node{feature[k], threshold[k], left[k], right[k], value[k]};
            if (!node.is_leaf()) {
                const auto nn = static_cast<std::int32_t>(n);
                if (node.feature >= static_cast<std::int32_t>(f.n_features) || node.left <= 0 || node.left >= nn ||
                    node.right <= 0 || node.right >= nn)
                    throw FormatError("model json: tree node refers outside the tree or feature range");
            }
            tree.nodes.push_back(node);
        }
        tree.in_bag = get<std::vector<Index>>(t, "in_bag");
        f.trees.push_back(std::move(tree));
    }
    if (f.trees.empty()) throw FormatError("model json: forest has no trees");
    return f;
}

Json cv_to_json(const CvResult& cv) {
    return {{"lambdas", cv.lambdas},         {"cv_errors", cv.cv_errors},
            {"cv_se", cv.cv_se},             {"chosen_lambda", cv.chosen_lambda},
            {"chosen_index", cv.chosen_index}, {"fold_assignment", cv.fold_assignment}};
}

CvResult cv_from_json(const Json& j) {
    CvResult cv;
    cv.lambdas = get<std::vector<double>>(j, "lambdas");
    cv.cv_errors = get<std::vector<double>>(j, "cv_errors");
    cv.cv_se = get<std::vector<double>>(j, "cv_se");
    cv.chosen_lambda = get<double>(j, "chosen_lambda");
    cv.chosen_index = get<Index>(j, "chosen_index");
    cv.fold_assignment = get<std::vector<Index>>(j, "fold_assignment");
    return cv;
}

Json model_to_json(const LassoedModel& m, const Json& extra) {
    Json j;
    j["format"] = "lassoed-forest-model";
    j["format_version"] = kModelFormat;
    j["provenance"] = extra;
    j["theta_hat"] = m.theta_hat;
    j["gamma0_hat"] = m.gamma0_hat;
    j["lambda_hat"] = m.lambda_hat;
    j["gamma_hat"] = vector_json(m.gamma_hat);
    j["transform"] = {{"center", m.transform.center}, {"scale", m.transform.scale}};
    Json curve = Json::array();
    for (const auto& [t, e] : m.cv_curve) curve.push_back({{"theta", t}, {"error", e}});
    j["cv_curve"] = std::move(curve);
    j["feature_names"] = m.feature_names;
    j["first_half"] = m.first_half;
    j["second_half"] = m.second_half;
    j["lambda_cv"] = m.cv ? cv_to_json(*m.cv) : Json();
    j["forest"] = forest_to_json(m.forest);
    return j;
}

LassoedModel model_from_json(const Json& j) {
    if (!j.is_object() || j.value("format", std::string()) != "lassoed-forest-model")
        throw FormatError("model json: not a lassoed-forest-model file");
    if (get<int>(j, "format_version") != kModelFormat)
        throw FormatError("model json: unsupported format_version " + j.at("format_version").dump());
    LassoedModel m;
    m.forest = forest_from_json(j.at("forest"));
    m.theta_hat = get<double>(j, "theta_hat");
    m.gamma0_hat = get<double>(j, "gamma0_hat");
    m.lambda_hat = get<double>(j, "lambda_hat");
    m.gamma_hat = vector_from(get<std::vector<double>>(j, "gamma_hat"));
    if (static_cast<Index>(m.gamma_hat.size()) != m.forest.size())
        throw FormatError("model json: gamma_hat length differs from tree count");
    const Json& t = j.at("transform");
    m.transform.center = get<double>(t, "center");
    m.transform.scale = get<double>(t, "scale");
    for (const auto& c : j.at("cv_curve")) m.cv_curve.emplace_back(get<double>(c, "theta"), get<double>(c, "error"));
    m.feature_names = get<std::vector<std::string>>(j, "feature_names");
    if (!m.feature_names.empty() && m.feature_names.size() != m.forest.n_features)
        throw FormatError("model json: feature_names length differs from n_features");
    m.first_half = get<std::vector<Index>>(j, "first_half");
    m.second_half = get<std::vector<Index>>(j, "second_half");
    if (j.contains("lambda_cv") && !j.at("lambda_cv").is_null()) m.cv = cv_from_json(j.at("lambda_cv"));
    return m;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("'" + path + "': " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace lf::io
