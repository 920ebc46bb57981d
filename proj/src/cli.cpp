#include "lf/cli.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "lf/config.hpp"
#include "lf/csv.hpp"
#include "lf/experiments.hpp"
#include "lf/io.hpp"
#include "lf/theory.hpp"

namespace lf::cli {

namespace {

using config::Json;
using csv::format_double;
namespace ex = lf::experiments;

class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    int workers = 0;
    std::string response_column = "y";

    Exec exec() const {
        return workers > 0 ? Exec{workers} : Exec::hardware();
    }
};

Json load_config(const std::string& path) {
    if (path.empty()) return Json::object();
    Json j = io::read_json_file(path);
    if (!j.is_object()) throw config::ConfigError("config: top level must be a JSON object");
    return j;
}

std::uint64_t resolve_seed(const Common& c, const Json& cfg) {
    if (c.seed) return *c.seed;
    return config::seed_of(cfg).value_or(0);
}

/// Files are collected first and written only once the run has succeeded.
struct Outputs {
    std::vector<std::pair<std::filesystem::path, std::string>> files;

    void add(std::filesystem::path p, std::string text) { files.emplace_back(std::move(p), std::move(text)); }
    void commit(std::ostream& log) const {
        for (const auto& [p, text] : files) {
            if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
            io::write_text_file(p.string(), text);
            log << "wrote " << p.string() << '\n';
        }
    }
};

Json provenance_json(const ex::Provenance& p) {
    return {{"config_hash", p.config_hash}, {"seed", p.seed}, {"version", p.version}};
}

std::string with_provenance(const ex::Provenance& p, const std::function<void(std::ostream&)>& body) {
    std::ostringstream s;
    ex::write_provenance(s, p);
    body(s);
    return s.str();
}

Json num(double v) { return std::isfinite(v) ? Json(v) : Json(); }
std::string cell(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }

// ---- fit ----

int cmd_fit(const Common& c, const std::string& data_path, std::ostream& out) {
    const Json raw = load_config(c.config_path);
    config::FitRun run = config::parse_fit_run(raw);
    const std::uint64_t seed = resolve_seed(c, raw);
    run.fit.seed = seed;
    Dataset data = csv::read_dataset(data_path, c.response_column);

    Dataset train = data, test;
    const bool has_test = run.test_fraction > 0.0;
    if (has_test) {
        std::vector<Index> perm(data.rows());
        std::iota(perm.begin(), perm.end(), Index{0});
        RngStream r(seed, 7);
        for (Index i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[r.uniform_index(i)]);
        const auto n_test = static_cast<Index>(std::ceil(run.test_fraction * static_cast<double>(data.rows())));
        if (n_test < 1 || data.rows() - n_test < 4) throw UsageError("fit: dataset too small for the test split");
        std::vector<Index> te(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
        std::vector<Index> tr(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
        std::sort(te.begin(), te.end());
        std::sort(tr.begin(), tr.end());
        train = data.subset(tr);
        test = data.subset(te);
    }

    const Exec exec = c.exec();
    const LassoedModel model =
        run.estimator == "post_selection" ? fit_post_selection(train, run.fit, exec) : fit_lassoed(train, run.fit, exec);

    const Json resolved = config::to_json(run);
    ex::Provenance prov{config::config_hash(resolved), seed, io::kVersion};
    Json extra = provenance_json(prov);
    extra["config"] = resolved;
    extra["response_column"] = c.response_column;

    out << "estimator " << run.estimator << '\n';
    out << "theta_hat " << format_double(model.theta_hat) << '\n';
    out << "lambda_hat " << format_double(model.lambda_hat) << '\n';
    out << "nonzero_trees " << (model.gamma_hat.array() != 0.0).count() << " of " << model.forest.size() << '\n';
    for (const auto& [t, e] : model.cv_curve) out << "cv_error theta=" << format_double(t) << ' ' << format_double(e) << '\n';
    if (has_test) {
        const Vector pred = predict_lassoed(model, test.features, exec);
        const double mse = (pred - test.response).squaredNorm() / static_cast<double>(test.rows());
        extra["heldout_mse"] = mse;
        extra["heldout_rows"] = test.rows();
        out << "heldout_mse " << format_double(mse) << '\n';
    }

    Outputs files;
    files.add(std::filesystem::path(c.out) / ("model-" + prov.config_hash + "-" + std::to_string(seed) + ".json"),
              io::dump(io::model_to_json(model, extra)));
    files.commit(out);
    return 0;
}

// ---- predict ----

Matrix model_features(const LassoedModel& model, const csv::Table& table, const std::string& response_column) {
    const Index p = model.n_features();
    if (!model.feature_names.empty()) {
        for (const auto& name : model.feature_names)
            if (std::find(table.header.begin(), table.header.end(), name) == table.header.end())
                throw UsageError("predict: feature '" + name + "' of the model is missing from the data (model has " +
                                 std::to_string(p) + " features)");
        return csv::select_features(table, model.feature_names);
    }
    std::vector<std::string> names;
    for (const auto& h : table.header)
        if (h != response_column && h != csv::kSignalColumn) names.push_back(h);
    if (names.size() != p)
        throw UsageError("predict: data has " + std::to_string(names.size()) + " feature columns, model expects " +
                         std::to_string(p));
    return csv::select_features(table, names);
}

ex::Provenance model_provenance(const Json& j) {
    ex::Provenance p;
    p.version = io::kVersion;
    if (j.contains("provenance") && j.at("provenance").is_object()) {
        const Json& pr = j.at("provenance");
        p.config_hash = pr.value("config_hash", std::string());
        p.seed = pr.value("seed", std::uint64_t{0});
    }
    return p;
}

void emit(const Common& c, const std::string& text, std::ostream& out, bool to_file) {
    if (to_file) {
        Outputs files;
        files.add(c.out, text);
        files.commit(out);
    } else {
        out << text;
    }
}

int cmd_predict(const Common& c, const std::string& model_path, const std::string& data_path, bool to_file,
                std::ostream& out) {
    const Json mj = io::read_json_file(model_path);
    const LassoedModel model = io::model_from_json(mj);
    const csv::Table table = csv::read_table_file(data_path);
    const Matrix x = model_features(model, table, c.response_column);
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (!std::isfinite(x.data()[i])) throw UsageError("predict: non-finite feature value");
    const Vector pred = x.rows() > 0 ? predict_lassoed(model, x, c.exec()) : Vector();
    const std::string text = with_provenance(model_provenance(mj), [&](std::ostream& s) {
        s << "prediction\n";
        for (Eigen::Index i = 0; i < pred.size(); ++i) s << format_double(pred(i)) << '\n';
    });
    emit(c, text, out, to_file);
    return 0;
}

// ---- importance ----

int cmd_importance(const Common& c, const std::string& model_path, bool absolute, bool to_file, std::ostream& out) {
    const Json mj = io::read_json_file(model_path);
    const LassoedModel model = io::model_from_json(mj);
    const ImportanceVector iv = variable_importance(model, absolute);
    const std::string text = with_provenance(model_provenance(mj), [&](std::ostream& s) {
        s << "feature,kappa\n";
        for (Eigen::Index k = 0; k < iv.kappa.size(); ++k) {
            const auto idx = static_cast<Index>(k);
            s << (model.feature_names.empty() ? "x" + std::to_string(idx + 1) : model.feature_names[idx]) << ','
              << format_double(iv.kappa(k)) << '\n';
        }
    });
    emit(c, text, out, to_file);
    return 0;
}

// ---- experiment ----

Json aggregates_json(const ex::SweepReport& r) {
    Json a = Json::array();
    for (const auto& g : r.aggregates)
        a.push_back({{"snr", g.snr},
                     {"method", ex::method_name(g.method)},
                     {"mean_test_mse", num(g.test_mse.mean)},
                     {"se_test_mse", num(g.test_mse.se)},
                     {"mean_theta_hat", num(g.theta_hat.mean)},
                     {"mean_est_error", num(g.est_error.mean)},
                     {"admissible_fraction", g.admissible_fraction}});
    return a;
}

Json theory_results(const config::TheoryRun& run, const RngStream& rng, Exec exec, std::string& csv_body) {
    std::ostringstream s;
    s << "section,param,formula_value,exact_value,mc_value,mc_se\n";
    Json rows = Json::array();
    const auto row = [&](const std::string& section, double param, double formula, double exact, double mc,
                         double se) {
        s << section << ',' << cell(param) << ',' << cell(formula) << ',' << cell(exact) << ',' << cell(mc) << ','
          << cell(se) << '\n';
        rows.push_back({{"section", section},
                        {"params", {{"param", num(param)}}},
                        {"formula_value", num(formula)},
                        {"exact_value", num(exact)},
                        {"mc_value", num(mc)},
                        {"mc_se", num(se)}});
    };
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (run.oracle) {
        const auto& o = *run.oracle;
        auto cfg = theory::equal_weight_oracle(o.J, o.N, o.sigma, o.gamma0);
        cfg.trials = o.trials;
        cfg.test_points = o.test_points;
        const auto res = theory::gaussian_oracle_mc(cfg, o.thetas, rng.child(1), exec);
        const auto tp = cfg.implied_params();
        for (const auto& pt : res.points) {
            row("oracle_prediction", pt.theta, theory::mse_ada_formula(tp, pt.theta),
                theory::oracle_exact_prediction_mse(cfg, pt.theta), pt.prediction_mse.mean, pt.prediction_mse.se);
            row("oracle_excess", pt.theta, theory::mse_ada_formula(tp, pt.theta) - tp.phi,
                theory::oracle_exact_prediction_mse(cfg, pt.theta) - cfg.sigma * cfg.sigma, pt.excess_mse.mean,
                pt.excess_mse.se);
        }
        row("oracle_optimal_theta", nan, theory::optimal_theta(tp).theta, nan, nan, nan);
    }
    if (run.min_norm) {
        const auto& m = *run.min_norm;
        const double r = static_cast<double>(m.J) / static_cast<double>(m.N);
        const auto e = theory::min_norm_mc(m, rng.child(2), exec);
        row("min_norm", r, theory::min_norm_mse_limit(r, m.sigma2), nan, e.mean, e.se);
    }
    if (run.scaling) {
        for (auto mode : {theory::LearnerSpec::correct, theory::LearnerSpec::misspecified}) {
            auto sc = *run.scaling;
            sc.mode = mode;
            const std::string name = mode == theory::LearnerSpec::correct ? "scaling_correct" : "scaling_misspecified";
            const auto res = theory::variance_scaling(sc, rng.child(3), exec);
            for (const auto& pt : res.points) {
                row(name + "_psi", pt.s, nan, nan, pt.psi, nan);
                row(name + "_omega", pt.s, nan, nan, pt.omega, nan);
            }
            row(name + "_psi_slope", nan, nan, nan, res.psi_slope, nan);
            row(name + "_omega_slope", nan, nan, nan, res.omega_slope, nan);
        }
    }
    csv_body = s.str();
    return rows;
}

int cmd_experiment(const Common& c, const std::string& kind, std::ostream& out) {
    static const std::vector<std::string> kinds{"sweep", "decompose", "error-acc", "importance", "theory"};
    if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end())
        throw UsageError("experiment: unknown kind '" + kind + "' (sweep, decompose, error-acc, importance, theory)");
    Json raw = load_config(c.config_path);
    const std::uint64_t seed = resolve_seed(c, raw);
    const RngStream rng(seed, 0);
    const Exec exec = c.exec();
    const std::filesystem::path dir(c.out);

    Json resolved;
    std::optional<config::TheoryRun> theory_run;
    std::optional<ex::SweepConfig> sweep;
    if (kind == "theory") {
        theory_run = config::parse_theory(raw);
        resolved = config::to_json(*theory_run);
    } else {
        if (kind == "importance" && !raw.contains("dgp")) raw["dgp"] = "fixed_support";
        sweep = config::parse_sweep(raw);
        if (kind == "importance" && sweep->dgp != ex::DgpKind::fixed_support)
            throw config::ConfigError("experiment importance: dgp must be fixed_support");
        if (kind == "decompose" && sweep->replications < 10)
            throw config::ConfigError("experiment decompose: replications must be >= 10");
        resolved = config::to_json(*sweep);
    }
    const ex::Provenance prov{config::config_hash(Json{{"kind", kind}, {"config", resolved}}), seed, io::kVersion};
    const std::string stem = kind + "-" + prov.config_hash + "-" + std::to_string(seed);
    Json report{{"provenance", provenance_json(prov)}, {"kind", kind}, {"config", resolved}};
    Outputs files;
    const auto csv_file = [&](const std::string& suffix, const std::function<void(std::ostream&)>& body) {
        files.add(dir / (stem + suffix + ".csv"), with_provenance(prov, body));
    };

    if (kind == "theory") {
        std::string body;
        report["results"] = theory_results(*theory_run, rng, exec, body);
        files.add(dir / (stem + ".csv"), with_provenance(prov, [&](std::ostream& s) { s << body; }));
    } else if (kind == "sweep") {
        const auto r = ex::snr_sweep(*sweep, rng, exec);
        csv_file("", [&](std::ostream& s) { ex::write_sweep_csv(s, r); });
        csv_file("-summary", [&](std::ostream& s) { ex::write_sweep_summary_csv(s, r); });
        report["aggregates"] = aggregates_json(r);
    } else if (kind == "decompose") {
        const auto r = ex::bias_variance_decomposition(*sweep, rng, exec);
        csv_file("", [&](std::ostream& s) { ex::write_decomposition_csv(s, r); });
        Json rows = Json::array();
        for (const auto& d : r.rows)
            rows.push_back({{"snr", d.snr}, {"method", d.method}, {"bias2", d.bias2}, {"variance", d.variance},
                            {"noise", d.noise}, {"total", d.total}, {"mse_signal", d.mse_signal},
                            {"mse_signal_se", d.mse_signal_se}, {"identity_gap", d.identity_gap}});
        report["rows"] = std::move(rows);
    } else if (kind == "error-acc") {
        const auto r = ex::error_estimate_accuracy(*sweep, rng, exec);
        csv_file("", [&](std::ostream& s) { ex::write_scatter_csv(s, r); });
        csv_file("-agreement", [&](std::ostream& s) { ex::write_agreement_csv(s, r); });
        const auto rows_of = [](const std::vector<ex::SignAgreement>& v) {
            Json rows = Json::array();
            for (const auto& a : v)
                rows.push_back({{"snr", a.snr}, {"agree", a.agree}, {"total", a.total}, {"rate", a.rate}});
            return rows;
        };
        report["agreement"] = rows_of(r.agreement);
        report["agreement_heldout"] = rows_of(r.agreement_heldout);
    } else {
        const auto r = ex::importance_recovery(*sweep, rng, exec);
        csv_file("", [&](std::ostream& s) { ex::write_importance_csv(s, r); });
        Json rows = Json::array();
        for (const auto& row : r.rows)
            rows.push_back({{"snr", row.snr}, {"method", row.method}, {"mean_recovery", num(row.recovery.mean)},
                            {"se_recovery", num(row.recovery.se)}, {"used", row.recovery.count},
                            {"excluded", row.excluded}});
        report["rows"] = std::move(rows);
    }
    files.add(dir / (stem + ".json"), io::dump(report));
    files.commit(out);
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Lassoed forest: random forests with Lasso-reweighted, adaptively blended trees"};
    app.require_subcommand(1);
    Common common;
    const auto add_common = [&](CLI::App* sub, bool with_config) {
        if (with_config) sub->add_option("--config", common.config_path, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", common.seed, "Master seed (overrides the config)");
        sub->add_option("--workers", common.workers, "Worker threads (default: available cores)")
            ->check(CLI::NonNegativeNumber);
        sub->add_option("--response-column", common.response_column, "Response column name")
            ->capture_default_str();
    };

    std::string data_path, model_path, kind;
    bool absolute = false;

    auto* fit = app.add_subcommand("fit", "Fit a Lassoed (or post-selection) forest to a CSV dataset");
    fit->add_option("data", data_path, "Training CSV")->required()->check(CLI::ExistingFile);
    add_common(fit, true);
    fit->add_option("--out", common.out, "Output directory")->capture_default_str();

    auto* predict = app.add_subcommand("predict", "Predict with a saved model");
    predict->add_option("model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
    predict->add_option("data", data_path, "Feature CSV")->required()->check(CLI::ExistingFile);
    add_common(predict, false);
    auto* predict_out = predict->add_option("--out", common.out, "Output CSV file (default: stdout)");

    auto* importance = app.add_subcommand("importance", "Split-count variable importance of a saved model");
    importance->add_option("model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
    importance->add_flag("--absolute", absolute, "Weight split counts by |gamma| instead of gamma");
    add_common(importance, false);
    auto* importance_out = importance->add_option("--out", common.out, "Output CSV file (default: stdout)");

    auto* experiment = app.add_subcommand("experiment", "Run a simulation study");
    experiment->add_option("kind", kind, "sweep | decompose | error-acc | importance | theory")->required();
    add_common(experiment, true);
    experiment->add_option("--out", common.out, "Output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*fit) return cmd_fit(common, data_path, out);
        if (*predict) return cmd_predict(common, model_path, data_path, predict_out->count() > 0, out);
        if (*importance) return cmd_importance(common, model_path, absolute, importance_out->count() > 0, out);
        return cmd_experiment(common, kind, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace lf::cli
