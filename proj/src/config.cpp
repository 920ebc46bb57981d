#include "lf/config.hpp"

#include <cstdio>

namespace lf::config {

StrictObject::StrictObject(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
}

bool StrictObject::has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
}

template <class T>
T StrictObject::get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    const Json& v = j_.at(key);
    try {
        if constexpr (std::is_same_v<T, Index> || std::is_same_v<T, std::uint64_t>) {
            if (!v.is_number_unsigned()) throw ConfigError("");
        } else if constexpr (std::is_same_v<T, double>) {
            if (!v.is_number()) throw ConfigError("");
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError("");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError("");
        }
        return v.get<T>();
    } catch (const std::exception&) {
        throw ConfigError(where_ + "." + key + ": wrong type (" + v.dump() + ")");
    }
}

const Json& StrictObject::section(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
}

void StrictObject::finish() const {
    for (const auto& [k, v] : j_.items())
        if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
}

template double StrictObject::get<double>(const std::string&, double);
template Index StrictObject::get<Index>(const std::string&, Index);
template bool StrictObject::get<bool>(const std::string&, bool);
template std::string StrictObject::get<std::string>(const std::string&, std::string);
template std::vector<double> StrictObject::get<std::vector<double>>(const std::string&, std::vector<double>);

namespace {

template <class F>
auto guarded(F&& f) {
    try {
        return f();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
}

}  // namespace

FitConfig parse_fit(const Json& j) {
    return guarded([&] {
        StrictObject o(j, "fit");
        FitConfig c;
        c.n_trees = o.get("n_trees", c.n_trees);
        c.tree_params.mtry = o.get("mtry", c.tree_params.mtry);
        c.tree_params.min_node_size = o.get("min_node_size", c.tree_params.min_node_size);
        if (o.has("max_leaf_nodes") && !j.at("max_leaf_nodes").is_null())
            c.tree_params.max_leaf_nodes = o.get<Index>("max_leaf_nodes", 0);
        c.theta_grid = o.get("theta_grid", c.theta_grid);
        c.cv_folds = o.get("cv_folds", c.cv_folds);
        c.n_lambda = o.get("n_lambda", c.n_lambda);
        c.lambda_ratio = o.get("lambda_ratio", c.lambda_ratio);
        c.one_se_rule = o.get("one_se_rule", c.one_se_rule);
        c.solver.tol = o.get("tol", c.solver.tol);
        c.solver.max_iter = o.get("max_iter", c.solver.max_iter);
        c.solver.kkt_tol = o.get("kkt_tol", c.solver.kkt_tol);
        c.standardize_response = o.get("standardize_response", c.standardize_response);
        c.penalize_intercept = o.get("penalize_intercept", c.penalize_intercept);
        c.cross_fitting = o.get("cross_fitting", c.cross_fitting);
        c.split_ratio = o.get("split_ratio", c.split_ratio);
        const std::string tz = o.get<std::string>("theta_zero_error", "offset_cv");
        if (tz == "offset_cv") c.theta_zero_error = ThetaZeroError::offset_cv;
        else if (tz == "oob") c.theta_zero_error = ThetaZeroError::oob;
        else throw ConfigError("fit.theta_zero_error: expected \"offset_cv\" or \"oob\"");
        o.finish();
        c.validate();
        return c;
    });
}

Json to_json(const FitConfig& c) {
    Json j;
    j["n_trees"] = c.n_trees;
    j["mtry"] = c.tree_params.mtry;
    j["min_node_size"] = c.tree_params.min_node_size;
    j["max_leaf_nodes"] = c.tree_params.max_leaf_nodes ? Json(*c.tree_params.max_leaf_nodes) : Json();
    j["theta_grid"] = c.theta_grid;
    j["cv_folds"] = c.cv_folds;
    j["n_lambda"] = c.n_lambda;
    j["lambda_ratio"] = c.lambda_ratio;
    j["one_se_rule"] = c.one_se_rule;
    j["tol"] = c.solver.tol;
    j["max_iter"] = c.solver.max_iter;
    j["kkt_tol"] = c.solver.kkt_tol;
    j["standardize_response"] = c.standardize_response;
    j["penalize_intercept"] = c.penalize_intercept;
    j["cross_fitting"] = c.cross_fitting;
    j["split_ratio"] = c.split_ratio;
    j["theta_zero_error"] = c.theta_zero_error == ThetaZeroError::oob ? "oob" : "offset_cv";
    return j;
}

experiments::SweepConfig parse_sweep(const Json& j) {
    using experiments::DgpKind;
    return guarded([&] {
        StrictObject o(j, "sweep");
        experiments::SweepConfig c;
        c.fit.n_trees = 100;
        o.get<Index>("seed", 0);  // consumed by the caller
        const std::string dgp = o.get<std::string>("dgp", "polynomial");
        if (dgp == "polynomial") c.dgp = DgpKind::polynomial;
        else if (dgp == "tree") c.dgp = DgpKind::tree;
        else if (dgp == "fixed_support") c.dgp = DgpKind::fixed_support;
        else throw ConfigError("sweep.dgp: expected polynomial, tree or fixed_support");
        const Index n = o.get("n", c.poly.n);
        const Index p = o.get("p", c.poly.p);
        const double cap = o.get("c", c.poly.c);
        const double pi = o.get("pi", c.poly.pi);
        c.poly.n = c.tree.n = n;
        c.poly.p = c.tree.p = p;
        c.poly.c = c.tree.c = cap;
        c.poly.pi = c.tree.pi = pi;
        c.tree.rho = o.get("rho", c.tree.rho);
        c.tree.max_leaves = o.get("max_leaves", c.tree.max_leaves);
        c.tree.phi_sample = o.get("phi_sample", c.tree.phi_sample);
        c.support = o.get("support", c.support);
        c.snr_grid = o.get("snr_grid", c.snr_grid);
        c.replications = o.get("replications", c.replications);
        c.test_size = o.get("test_size", c.test_size);
        if (o.has("fit")) {
            Json f = j.at("fit");
            if (f.is_object() && !f.contains("n_trees")) f["n_trees"] = c.fit.n_trees;
            c.fit = parse_fit(f);
        }
        o.finish();
        c.validate();
        return c;
    });
}

Json to_json(const experiments::SweepConfig& c) {
    Json j;
    j["dgp"] = experiments::dgp_name(c.dgp);
    j["n"] = c.n();
    j["p"] = c.p();
    j["c"] = c.poly.c;
    j["pi"] = c.poly.pi;
    j["rho"] = c.tree.rho;
    j["max_leaves"] = c.tree.max_leaves;
    j["phi_sample"] = c.tree.phi_sample;
    j["support"] = c.support;
    j["snr_grid"] = c.snr_grid;
    j["replications"] = c.replications;
    j["test_size"] = c.test_size;
    j["fit"] = to_json(c.fit);
    return j;
}

TheoryRun parse_theory(const Json& j) {
    return guarded([&] {
        StrictObject o(j, "theory");
        o.get<Index>("seed", 0);
        TheoryRun r;
        const bool all = !j.contains("oracle") && !j.contains("min_norm") && !j.contains("scaling");
        if (all || o.has("oracle")) {
            OracleRun d;
            if (j.contains("oracle")) {
                StrictObject s(o.section("oracle"), "theory.oracle");
                d.J = s.get("J", d.J);
                d.N = s.get("N", d.N);
                d.sigma = s.get("sigma", d.sigma);
                d.gamma0 = s.get("gamma0", d.gamma0);
                d.trials = s.get("trials", d.trials);
                d.test_points = s.get("test_points", d.test_points);
                d.thetas = s.get("thetas", d.thetas);
                s.finish();
            }
            theory::equal_weight_oracle(d.J, d.N, d.sigma, d.gamma0).validate();
            r.oracle = d;
        }
        if (all || o.has("min_norm")) {
            theory::MinNormConfig d;
            if (j.contains("min_norm")) {
                StrictObject s(o.section("min_norm"), "theory.min_norm");
                d.J = s.get("J", d.J);
                d.N = s.get("N", d.N);
                d.sigma2 = s.get("sigma2", d.sigma2);
                d.trials = s.get("trials", d.trials);
                d.test_points = s.get("test_points", d.test_points);
                s.finish();
            }
            d.validate();
            r.min_norm = d;
        }
        if (all || o.has("scaling")) {
            theory::ScalingConfig d;
            if (j.contains("scaling")) {
                StrictObject s(o.section("scaling"), "theory.scaling");
                d.s_grid = s.get("s_grid", d.s_grid);
                d.beta1 = s.get("beta1", d.beta1);
                d.beta2 = s.get("beta2", d.beta2);
                d.N = s.get("N", d.N);
                d.learners = s.get("learners", d.learners);
                d.replications = s.get("replications", d.replications);
                d.test_points = s.get("test_points", d.test_points);
                s.finish();
            }
            d.validate();
            r.scaling = d;
        }
        o.finish();
        return r;
    });
}

Json to_json(const TheoryRun& r) {
    Json j = Json::object();
    if (r.oracle) {
        const auto& d = *r.oracle;
        j["oracle"] = {{"J", d.J},         {"N", d.N},
                       {"sigma", d.sigma}, {"gamma0", d.gamma0},
                       {"trials", d.trials}, {"test_points", d.test_points},
                       {"thetas", d.thetas}};
    }
    if (r.min_norm) {
        const auto& d = *r.min_norm;
        j["min_norm"] = {{"J", d.J}, {"N", d.N}, {"sigma2", d.sigma2}, {"trials", d.trials},
                         {"test_points", d.test_points}};
    }
    if (r.scaling) {
        const auto& d = *r.scaling;
        j["scaling"] = {{"s_grid", d.s_grid},       {"beta1", d.beta1},
                        {"beta2", d.beta2},         {"N", d.N},
                        {"learners", d.learners},   {"replications", d.replications},
                        {"test_points", d.test_points}};
    }
    return j;
}

FitRun parse_fit_run(const Json& j) {
    return guarded([&] {
        StrictObject o(j, "config");
        o.get<Index>("seed", 0);
        FitRun r;
        r.estimator = o.get("estimator", r.estimator);
        if (r.estimator != "lassoed" && r.estimator != "post_selection")
            throw ConfigError("config.estimator: expected \"lassoed\" or \"post_selection\"");
        r.test_fraction = o.get("test_fraction", r.test_fraction);
        if (!(r.test_fraction >= 0.0 && r.test_fraction < 1.0))
            throw ConfigError("config.test_fraction: must lie in [0, 1)");
        if (o.has("fit")) r.fit = parse_fit(j.at("fit"));
        o.finish();
        return r;
    });
}

Json to_json(const FitRun& r) {
    return {{"estimator", r.estimator}, {"test_fraction", r.test_fraction}, {"fit", to_json(r.fit)}};
}

std::optional<std::uint64_t> seed_of(const Json& j) {
    if (!j.is_object() || !j.contains("seed")) return std::nullopt;
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("config.seed: expected a nonnegative integer");
    return j.at("seed").get<std::uint64_t>();
}

Json without_seed(const Json& j) {
    Json out = j;
    if (out.is_object()) out.erase("seed");
    return out;
}

std::string config_hash(const Json& canonical) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical.dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace lf::config
