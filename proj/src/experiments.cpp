#include "lf/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "lf/csv.hpp"
#include "lf/forest.hpp"

namespace lf::experiments {

using csv::format_double;

const char* method_name(Method m) {
    switch (m) {
        case Method::vanilla: return "vanilla";
        case Method::post_selection: return "post_selection";
        case Method::lassoed: return "lassoed";
    }
    return "?";
}

const char* dgp_name(DgpKind k) {
    switch (k) {
        case DgpKind::polynomial: return "polynomial";
        case DgpKind::tree: return "tree";
        case DgpKind::fixed_support: return "fixed_support";
    }
    return "?";
}

Index SweepConfig::n() const { return dgp == DgpKind::tree ? tree.n : poly.n; }
Index SweepConfig::p() const { return dgp == DgpKind::tree ? tree.p : poly.p; }

void SweepConfig::validate() const {
    if (dgp == DgpKind::tree) tree.validate();
    else poly.validate();
    if (dgp == DgpKind::fixed_support && (support < 1 || support > poly.p))
        throw InvalidArgument("sweep config: support must lie in [1, p]");
    if (snr_grid.empty()) throw InvalidArgument("sweep config: snr_grid is empty");
    for (Index k = 0; k < snr_grid.size(); ++k) {
        if (!(snr_grid[k] > 0.0) || !std::isfinite(snr_grid[k]))
            throw InvalidArgument("sweep config: snr values must be positive and finite");
        if (k > 0 && !(snr_grid[k - 1] < snr_grid[k])) throw InvalidArgument("sweep config: snr_grid must ascend");
    }
    if (replications < 2) throw InvalidArgument("sweep config: replications must be >= 2");
    if (test_size < 1) throw InvalidArgument("sweep config: test_size must be >= 1");
    fit.validate();
}

const CellRecord& StudyResult::at(Index snr_index, Index rep, Method m) const {
    const Index reps = config.replications;
    return records[(snr_index * reps + rep) * kMethods.size() + static_cast<Index>(m)];
}

namespace {

Dgp make_dgp(const SweepConfig& cfg, const RngStream& rng) {
    RngStream r = rng.child(1);
    switch (cfg.dgp) {
        case DgpKind::polynomial: {
            PolyDgpSpec s = cfg.poly;
            if (!s.has_coefficients()) draw_poly_coefficients(s, r);
            return {s};
        }
        case DgpKind::fixed_support:
            return {fixed_support_spec(cfg.poly.n, cfg.poly.p, cfg.support, cfg.poly.c, 1.0)};
        case DgpKind::tree:
            return {build_tree_dgp(cfg.tree, r)};
    }
    throw InvalidArgument("sweep config: unknown dgp");
}

Vector standard_normal_vector(Index n, RngStream& rng) {
    Vector v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
    return v;
}

double mse(const Vector& a, const Vector& b) { return (a - b).squaredNorm() / static_cast<double>(a.size()); }

void fill_importance(CellRecord& rec, const LassoedModel& model, const StudyOptions& opts, Index support) {
    try {
        const ImportanceVector iv = variable_importance(model, opts.absolute_weights);
        rec.importance_ok = true;
        rec.kappa_sum = iv.kappa.sum();
        rec.recovery = recovery_score(iv.kappa, support);
        bool nonneg = true;
        if (model.theta_hat > 0.0) {
            Vector w = model.gamma_hat;
            if (opts.absolute_weights) w = w.cwiseAbs();
            const Vector weighted = split_counts(model.forest).cast<double>() * w;
            nonneg = (weighted.array() >= 0.0).all();
        }
        rec.weighted_counts_nonnegative = nonneg;
    } catch (const DegenerateError&) {
        rec.importance_ok = false;
        rec.recovery = std::numeric_limits<double>::quiet_NaN();
        rec.kappa_sum = std::numeric_limits<double>::quiet_NaN();
    }
}

struct RepOut {
    std::vector<CellRecord> records;  // (snr, method)
    std::vector<std::array<Vector, 3>> preds;
};

}  // namespace

StudyResult run_study(const SweepConfig& cfg, const RngStream& rng, const StudyOptions& opts, Exec exec) {
    cfg.validate();
    StudyResult res;
    res.config = cfg;
    const Dgp dgp = make_dgp(cfg, rng);
    res.phi = dgp.phi();
    if (!(res.phi > 0.0)) throw DegenerateError("run_study: signal variance is 0");
    for (double s : cfg.snr_grid) res.sigma2.push_back(res.phi / s);

    RngStream test_rng = rng.child(2);
    const Matrix x_test = standard_normal_matrix(cfg.test_size, dgp.p(), test_rng);
    res.test_signal = dgp.signal(x_test);

    const Index n_snr = cfg.snr_grid.size();
    const Index support = cfg.dgp == DgpKind::fixed_support ? cfg.support : std::min<Index>(5, dgp.p());
    const RngStream rep_root = rng.child(3);
    std::vector<RepOut> outs(cfg.replications);

    parallel_for(cfg.replications, exec, [&](Index rep) {
        RngStream rr = rep_root.child(rep);
        const Matrix x = standard_normal_matrix(cfg.n(), dgp.p(), rr);
        const Vector g = dgp.signal(x);
        const Vector z = standard_normal_vector(cfg.n(), rr);
        const Vector z_test = standard_normal_vector(cfg.test_size, rr);
        FitConfig fc = cfg.fit;
        fc.seed = rr.child(0).next_u64();

        RepOut& out = outs[rep];
        for (Index si = 0; si < n_snr; ++si) {
            const double sd = std::sqrt(res.sigma2[si]);
            Dataset d;
            d.features = x;
            d.signal = g;
            d.response = g + sd * z;
            const MethodFits fits = fit_all_methods(d, fc, Exec::serial());
            const Matrix tv = prediction_matrix(fits.lassoed.forest, x_test, RowOrigin::held_out).values;
            const Vector y_test = res.test_signal + sd * z_test;

            std::array<Vector, 3> preds;
            const std::array<const LassoedModel*, 3> models{&fits.vanilla, &fits.post_selection, &fits.lassoed};
            double lassoed_est = 0.0;
            for (const auto& [t, e] : fits.lassoed.cv_curve)
                if (t == fits.lassoed.theta_hat) lassoed_est = e;
            const std::array<double, 3> est{fits.vanilla_oob_error, fits.post_selection_cv_error, lassoed_est};
            for (Index k = 0; k < kMethods.size(); ++k) {
                preds[k] = predict_from_matrix(*models[k], tv);
                CellRecord rec;
                rec.snr = cfg.snr_grid[si];
                rec.rep = rep;
                rec.method = kMethods[k];
                rec.test_mse = mse(preds[k], y_test);
                rec.signal_mse = mse(preds[k], res.test_signal);
                rec.theta_hat = models[k]->theta_hat;
                rec.est_error = est[k];
                if (kMethods[k] == Method::vanilla) rec.est_error_heldout = fits.vanilla_heldout_error;
                if (opts.importance) fill_importance(rec, *models[k], opts, support);
                out.records.push_back(rec);
            }
            if (opts.keep_predictions) out.preds.push_back(std::move(preds));
        }
    });

    if (opts.keep_predictions) {
        res.predictions.resize(n_snr);
        for (auto& per_method : res.predictions)
            for (auto& m : per_method)
                m.resize(static_cast<Eigen::Index>(cfg.replications), static_cast<Eigen::Index>(cfg.test_size));
    }
    for (Index si = 0; si < n_snr; ++si)
        for (Index rep = 0; rep < cfg.replications; ++rep) {
            for (Index k = 0; k < kMethods.size(); ++k) {
                res.records.push_back(outs[rep].records[si * kMethods.size() + k]);
                if (opts.keep_predictions)
                    res.predictions[si][k].row(static_cast<Eigen::Index>(rep)) = outs[rep].preds[si][k].transpose();
            }
        }
    return res;
}

Summary summarize(const std::vector<double>& v) {
    Summary s;
    s.count = v.size();
    if (v.empty()) {
        s.mean = std::numeric_limits<double>::quiet_NaN();
        return s;
    }
    s.mean = sample_mean(v);
    s.se = v.size() > 1 ? sample_sd(v) / std::sqrt(static_cast<double>(v.size())) : 0.0;
    return s;
}

// ---- SNR sweep ----

const SweepAggregate& SweepReport::find(double snr, Method m) const {
    for (const auto& a : aggregates)
        if (a.snr == snr && a.method == m) return a;
    throw InvalidArgument("sweep report: no aggregate for snr " + format_double(snr));
}

SweepReport sweep_report(const StudyResult& study) {
    SweepReport r;
    r.records = study.records;
    const auto& cfg = study.config;
    for (Index si = 0; si < cfg.snr_grid.size(); ++si) {
        for (Method m : kMethods) {
            std::vector<double> mse_v, th, est;
            Index admissible = 0;
            for (Index rep = 0; rep < cfg.replications; ++rep) {
                const auto& rec = study.at(si, rep, m);
                mse_v.push_back(rec.test_mse);
                th.push_back(rec.theta_hat);
                est.push_back(rec.est_error);
                const double best = std::min(study.at(si, rep, Method::vanilla).test_mse,
                                             study.at(si, rep, Method::post_selection).test_mse);
                if (rec.test_mse <= 1.10 * best) ++admissible;
            }
            SweepAggregate a;
            a.snr = cfg.snr_grid[si];
            a.method = m;
            a.test_mse = summarize(mse_v);
            a.theta_hat = summarize(th);
            a.est_error = summarize(est);
            a.admissible_fraction = static_cast<double>(admissible) / static_cast<double>(cfg.replications);
            r.aggregates.push_back(a);
        }
    }
    return r;
}

SweepReport snr_sweep(const SweepConfig& cfg, const RngStream& rng, Exec exec) {
    return sweep_report(run_study(cfg, rng, {}, exec));
}

// ---- decomposition ----

DecompositionRow decompose(const Matrix& predictions, const Vector& signal) {
    const auto R = predictions.rows();
    const auto M = predictions.cols();
    if (R < 1 || M != signal.size()) throw InvalidArgument("decompose: predictions must be R x M with M = signal length");
    DecompositionRow row;
    std::vector<double> per_rep(static_cast<Index>(R), 0.0);
    for (Eigen::Index m = 0; m < M; ++m) {
        const double mean = predictions.col(m).mean();
        const double b = mean - signal(m);
        row.bias2 += b * b;
        row.variance += (predictions.col(m).array() - mean).square().sum() / static_cast<double>(R);
        for (Eigen::Index r = 0; r < R; ++r) {
            const double e = predictions(r, m) - signal(m);
            per_rep[static_cast<Index>(r)] += e * e / static_cast<double>(M);
        }
    }
    row.bias2 /= static_cast<double>(M);
    row.variance /= static_cast<double>(M);
    const Summary s = summarize(per_rep);
    row.mse_signal = s.mean;
    row.mse_signal_se = s.se;
    row.identity_gap = std::abs(row.bias2 + row.variance - row.mse_signal);
    row.total = row.bias2 + row.variance;
    return row;
}

DecompositionReport decomposition_report(const StudyResult& study) {
    if (study.predictions.empty()) throw InvalidArgument("decomposition_report: study kept no predictions");
    DecompositionReport rep;
    for (Index si = 0; si < study.config.snr_grid.size(); ++si)
        for (Index k = 0; k < kMethods.size(); ++k) {
            DecompositionRow row = decompose(study.predictions[si][k], study.test_signal);
            row.snr = study.config.snr_grid[si];
            row.method = method_name(kMethods[k]);
            row.noise = study.sigma2[si];
            row.total += row.noise;
            rep.rows.push_back(row);
        }
    return rep;
}

DecompositionReport bias_variance_decomposition(const SweepConfig& cfg, const RngStream& rng, Exec exec) {
    if (cfg.replications < 10) throw InvalidArgument("bias_variance_decomposition: needs replications >= 10");
    StudyOptions o;
    o.keep_predictions = true;
    return decomposition_report(run_study(cfg, rng, o, exec));
}

// ---- error-estimate accuracy ----

SignAgreement sign_agreement(const std::vector<double>& est_a, const std::vector<double>& est_b,
                             const std::vector<double>& true_a, const std::vector<double>& true_b) {
    const Index n = est_a.size();
    if (est_b.size() != n || true_a.size() != n || true_b.size() != n || n == 0)
        throw InvalidArgument("sign_agreement: need four nonempty series of equal length");
    const auto sign = [](double v) { return (v > 0.0) - (v < 0.0); };
    SignAgreement s;
    s.total = n;
    for (Index i = 0; i < n; ++i)
        if (sign(est_b[i] - est_a[i]) == sign(true_b[i] - true_a[i])) ++s.agree;
    s.rate = static_cast<double>(s.agree) / static_cast<double>(n);
    return s;
}

ErrorAccuracyReport error_accuracy_report(const StudyResult& study) {
    ErrorAccuracyReport r;
    const auto& cfg = study.config;
    for (Index si = 0; si < cfg.snr_grid.size(); ++si) {
        std::vector<double> ea, eh, eb, ta, tb;
        for (Index rep = 0; rep < cfg.replications; ++rep) {
            const auto& van = study.at(si, rep, Method::vanilla);
            const auto& post = study.at(si, rep, Method::post_selection);
            r.scatter.push_back({van.test_mse, van.est_error, "vanilla", van.snr, rep});
            r.scatter.push_back({van.test_mse, van.est_error_heldout, "vanilla_heldout", van.snr, rep});
            r.scatter.push_back({post.test_mse, post.est_error, "post_selection", post.snr, rep});
            eh.push_back(van.est_error_heldout);
            ea.push_back(study.at(si, rep, Method::vanilla).est_error);
            ta.push_back(study.at(si, rep, Method::vanilla).test_mse);
            eb.push_back(study.at(si, rep, Method::post_selection).est_error);
            tb.push_back(study.at(si, rep, Method::post_selection).test_mse);
        }
        SignAgreement s = sign_agreement(ea, eb, ta, tb);
        s.snr = cfg.snr_grid[si];
        r.agreement.push_back(s);
        SignAgreement h = sign_agreement(eh, eb, ta, tb);
        h.snr = cfg.snr_grid[si];
        r.agreement_heldout.push_back(h);
    }
    return r;
}

ErrorAccuracyReport error_estimate_accuracy(const SweepConfig& cfg, const RngStream& rng, Exec exec) {
    return error_accuracy_report(run_study(cfg, rng, {}, exec));
}

// ---- importance ----

double recovery_score(const Vector& kappa, Index k) {
    if (k > static_cast<Index>(kappa.size())) throw InvalidArgument("recovery_score: k exceeds kappa length");
    return kappa.head(static_cast<Eigen::Index>(k)).sum();
}

ImportanceReport importance_report(const StudyResult& study) {
    ImportanceReport r;
    const auto& cfg = study.config;
    for (Index si = 0; si < cfg.snr_grid.size(); ++si)
        for (Method m : kMethods) {
            RecoveryRow row;
            row.snr = cfg.snr_grid[si];
            row.method = method_name(m);
            std::vector<double> v;
            for (Index rep = 0; rep < cfg.replications; ++rep) {
                const auto& rec = study.at(si, rep, m);
                if (rec.importance_ok) v.push_back(rec.recovery);
                else ++row.excluded;
            }
            row.recovery = summarize(v);
            r.rows.push_back(row);
        }
    return r;
}

ImportanceReport importance_recovery(const SweepConfig& cfg, const RngStream& rng, Exec exec, bool absolute_weights) {
    if (cfg.dgp != DgpKind::fixed_support) throw InvalidArgument("importance_recovery: needs the fixed_support dgp");
    StudyOptions o;
    o.importance = true;
    o.absolute_weights = absolute_weights;
    return importance_report(run_study(cfg, rng, o, exec));
}

// ---- report files ----

void write_provenance(std::ostream& out, const Provenance& prov) {
    out << "# config_hash=" << prov.config_hash << '\n'
        << "# seed=" << prov.seed << '\n'
        << "# version=" << prov.version << '\n';
}

void write_sweep_csv(std::ostream& out, const SweepReport& r) {
    out << "snr,rep,method,test_mse,signal_mse,theta_hat,est_error\n";
    for (const auto& c : r.records)
        out << format_double(c.snr) << ',' << c.rep << ',' << method_name(c.method) << ',' << format_double(c.test_mse)
            << ',' << format_double(c.signal_mse) << ',' << format_double(c.theta_hat) << ','
            << format_double(c.est_error) << '\n';
}

void write_sweep_summary_csv(std::ostream& out, const SweepReport& r) {
    out << "snr,method,mean_test_mse,se_test_mse,mean_theta_hat,mean_est_error,admissible_fraction\n";
    for (const auto& a : r.aggregates)
        out << format_double(a.snr) << ',' << method_name(a.method) << ',' << format_double(a.test_mse.mean) << ','
            << format_double(a.test_mse.se) << ',' << format_double(a.theta_hat.mean) << ','
            << format_double(a.est_error.mean) << ',' << format_double(a.admissible_fraction) << '\n';
}

void write_decomposition_csv(std::ostream& out, const DecompositionReport& r) {
    out << "snr,method,bias2,variance,noise,total,mse_signal,mse_signal_se,identity_gap\n";
    for (const auto& d : r.rows)
        out << format_double(d.snr) << ',' << d.method << ',' << format_double(d.bias2) << ','
            << format_double(d.variance) << ',' << format_double(d.noise) << ',' << format_double(d.total) << ','
            << format_double(d.mse_signal) << ',' << format_double(d.mse_signal_se) << ','
            << format_double(d.identity_gap) << '\n';
}

void write_scatter_csv(std::ostream& out, const ErrorAccuracyReport& r) {
    out << "true_err,est_err,method,snr,rep\n";
    for (const auto& s : r.scatter)
        out << format_double(s.true_err) << ',' << format_double(s.est_err) << ',' << s.method << ','
            << format_double(s.snr) << ',' << s.rep << '\n';
}

void write_agreement_csv(std::ostream& out, const ErrorAccuracyReport& r) {
    out << "snr,vanilla_estimate,agree,total,rate\n";
    for (const auto* set : {&r.agreement, &r.agreement_heldout})
        for (const auto& a : *set)
            out << format_double(a.snr) << ',' << (set == &r.agreement ? "oob" : "heldout") << ',' << a.agree << ','
                << a.total << ',' << format_double(a.rate) << '\n';
}

void write_importance_csv(std::ostream& out, const ImportanceReport& r) {
    out << "snr,method,mean_recovery,se_recovery,used,excluded\n";
    for (const auto& row : r.rows)
        out << format_double(row.snr) << ',' << row.method << ',' << format_double(row.recovery.mean) << ','
            << format_double(row.recovery.se) << ',' << row.recovery.count << ',' << row.excluded << '\n';
}

}  // namespace lf::experiments
