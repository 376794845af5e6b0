#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "wgrisk/bounds.hpp"
#include "wgrisk/estimators.hpp"
#include "wgrisk/harness.hpp"
#include "wgrisk/model.hpp"
#include "wgrisk/primitives.hpp"
#include "wgrisk/risk.hpp"

namespace wgrisk {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitUsage = 2;

namespace cli {

struct Options {
    // global
    std::uint64_t seed = 0;
    int trials = 1;
    std::string out;
    std::string format = "json";
    std::string band;
    int block_cols = 4096;
    // model
    int n = 20;
    int d = 400;
    int n_minus = 0;             // 0: max(1, n/10)
    double r_plus = -1.0;        // < 0: d^0.6 / 4
    double spur_frac = 0.5;
    double delta_plus = 1.0;
    double delta_minus = 1.0;
    bool importance = false;
    double tau = 0.0;
    std::string config;
    // subcommand specific
    std::string method = "cmni";
    std::string data;
    double gd_step = 0.0;
    int gd_iters = 100000;
    double gd_tol = 1e-10;
    long mc = 0;
    double t = 4.6;
    int draws = 1000;
    std::string preset;
    std::string spec;
    int threads = 0;
    bool strict_bands = false;
};

class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline ModelConfig model_config(const Options& o) {
    ModelConfig c;
    if (!o.config.empty()) {
        std::ifstream is(o.config);
        if (!is) throw UsageError("cannot open config " + o.config);
        c = nlohmann::json::parse(is).get<ModelConfig>();
        c.seed = o.seed;
    } else {
        const int n_minus = o.n_minus > 0 ? o.n_minus : std::max(1, o.n / 10);
        const double r_plus = o.r_plus >= 0.0 ? o.r_plus : std::pow(static_cast<double>(o.d), 0.6) / 4.0;
        c = ModelConfig::aligned(o.d, o.n, n_minus, r_plus, o.spur_frac);
        c.delta_plus = o.delta_plus;
        c.delta_minus = o.delta_minus;
        c.tau = o.tau;
        c.seed = o.seed;
    }
    if (o.importance) c.importance_weights();
    c.validate();
    return c;
}

inline BandOptions parse_band(const std::string& s) {
    BandOptions b;
    if (s.empty()) return b;
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw UsageError("--band expects LO,HI");
    try {
        b.main_low = std::stod(s.substr(0, comma));
        b.main_high = std::stod(s.substr(comma + 1));
    } catch (const std::exception&) {
        throw UsageError("--band expects two numbers LO,HI");
    }
    if (!(b.main_low < b.main_high)) throw UsageError("--band requires LO < HI");
    return b;
}

inline void write_text(const Options& o, const std::string& text) {
    if (o.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream os(o.out, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + o.out);
    os << text;
}

inline void write_json(const Options& o, const nlohmann::json& j) { write_text(o, j.dump(2) + "\n"); }

inline Dataset obtain_dataset(const Options& o) {
    return o.data.empty() ? sample_dataset(model_config(o)) : load_dataset(o.data);
}

inline DualSolution fit(const Options& o, const Dataset& ds) {
    const AdjustmentWeights w = AdjustmentWeights::of(ds.config);
    const GramStats g = accumulate_gram(ds, o.block_cols);
    switch (method_from_string(o.method)) {
    case Method::cmni: return fit_cmni(g, w, ds.labels);
    case Method::ridge: return fit_ridge(g, w, ds.labels, ds.config.tau);
    case Method::gd: return fit_gd(g, w, ds.labels, GdOptions{o.gd_step, o.gd_iters, o.gd_tol});
    }
    throw UsageError("unknown method");
}

inline int cmd_sample(const Options& o) {
    if (o.out.empty()) throw UsageError("sample requires --out PATH");
    const Dataset ds = sample_dataset(model_config(o));
    save_dataset(ds, o.out);
    std::cout << nlohmann::json{{"path", o.out}, {"n", ds.X.rows()}, {"d", ds.X.cols()}, {"seed", ds.config.seed}}.dump() << "\n";
    return kExitOk;
}

inline int cmd_fit(const Options& o) {
    const Dataset ds = obtain_dataset(o);
    const DualSolution sol = fit(o, ds);
    nlohmann::json j = sol;
    j["interpolation_residual"] = interpolation_residual(sol, accumulate_gram(ds, o.block_cols), AdjustmentWeights::of(ds.config), ds.labels);
    write_json(o, j);
    return kExitOk;
}

inline int cmd_risk(const Options& o) {
    const Dataset ds = obtain_dataset(o);
    const DualSolution sol = fit(o, ds);
    RiskReport r = risk_report(sol, ds.config);
    if (o.mc > 0) {
        for (int b : {1, -1}) {
            const McEstimate e = monte_carlo_risk(sol, ds.config, b, o.mc, o.seed);
            GroupRisk& g = b > 0 ? r.plus : r.minus;
            g.mc_risk = e.rate;
            g.mc_std_err = e.std_err;
        }
    }
    nlohmann::json j = r;
    j["method"] = to_string(sol.method);
    j["tau"] = sol.tau;
    write_json(o, j);
    return kExitOk;
}

inline int cmd_bounds(const Options& o) {
    const ModelConfig c = model_config(o);
    nlohmann::json j = evaluate_bounds(c);
    for (int b : {1, -1}) {
        const ConsistencyResult cr = consistency_check(c, b);
        j[b > 0 ? "consistency_plus" : "consistency_minus"] = {{"applicable", cr.applicable}, {"holds", cr.holds}, {"slack", cr.slack}};
    }
    const AssumptionReport a = check_assumptions(c, 0.1, 1.0);
    j["assumptions"] = {{"a", a.slack_a}, {"b", a.slack_b}, {"c", a.slack_c}, {"d", a.slack_d}, {"all", a.all()}};
    write_json(o, j);
    return kExitOk;
}

inline int cmd_verify(const Options& o) {
    const BandOptions band = parse_band(o.band);
    const ModelConfig base = model_config(o);
    const AdjustmentWeights w = AdjustmentWeights::of(base);
    bool ok = true;
    double worst_mode = 0.0, worst_identity = 0.0, worst_woodbury = 0.0, worst_adj = 0.0;
    int band_failures = 0;
    std::vector<BoundCheckRow> last_rows;
    for (int t = 0; t < o.trials; ++t) {
        ModelConfig c = base;
        c.seed = o.trials == 1 ? o.seed : trial_seed(o.seed, static_cast<std::uint64_t>(t));
        const Dataset ds = sample_dataset(c);
        const Decomposition dec = build_decomposition(ds, c.tau);
        const VectorXd u = unit_vector(c.n());
        const PrimitiveSet direct = compute_primitives(dec, c, w, u, PrimitiveMode::direct);
        const PrimitiveSet rec = compute_primitives(dec, c, w, u, PrimitiveMode::recursive);
        worst_mode = std::max(worst_mode, max_relative_discrepancy(direct, rec));

        const WoodburyResult wb = woodbury_invert(dec);
        MatrixXd m = dec.gram(2);
        m.diagonal().array() += c.tau;
        const MatrixXd dense = m.ldlt().solve(MatrixXd::Identity(c.n(), c.n()));
        worst_woodbury = std::max(worst_woodbury, (wb.inverse[2] - dense).norm() / dense.norm());
        for (int k = 0; k < 2; ++k) {
            const Matrix3d prod = wb.a[k] * wb.det_adj[k].adj - wb.det_adj[k].det * Matrix3d::Identity();
            worst_adj = std::max(worst_adj, prod.cwiseAbs().maxCoeff() / std::max(1.0, std::abs(wb.det_adj[k].det)));
        }

        const DualSolution sol = fit_ridge(accumulate_gram(ds, o.block_cols), w, ds.labels, c.tau);
        for (int b : {1, -1}) worst_identity = std::max(worst_identity, risk_identity_check(rec, sol, b));

        last_rows = verify_primitive_bounds(rec, band);
        for (const auto& r : last_rows) band_failures += r.pass ? 0 : 1;
    }
    const AuxReport aux = check_aux_inequalities(base);
    const bool mode_ok = worst_mode <= 1e-8;
    const bool woodbury_ok = worst_woodbury <= 1e-8;
    const bool adj_ok = worst_adj <= 1e-10;
    const bool identity_ok = worst_identity <= 1e-8;
    const bool aux_ok = aux.margin_holds && (!aux.balance_applicable || aux.balance_holds);
    ok = mode_ok && woodbury_ok && adj_ok && identity_ok && aux_ok && (!o.strict_bands || band_failures == 0);

    if (o.format == "csv") {
        std::ostringstream os;
        os << "name,k,value,normalized,band_low,band_high,pass\n";
        for (const auto& r : last_rows)
            os << r.name << ',' << r.k << ',' << detail::fmt(r.value) << ',' << detail::fmt(r.normalized) << ','
               << detail::fmt(r.band_low) << ',' << detail::fmt(r.band_high) << ',' << (r.pass ? "true" : "false") << '\n';
        write_text(o, os.str());
    } else {
        nlohmann::json j{{"trials", o.trials},
                         {"mode_equivalence", {{"max_rel_err", worst_mode}, {"pass", mode_ok}}},
                         {"woodbury", {{"max_rel_frobenius", worst_woodbury}, {"pass", woodbury_ok}}},
                         {"adjugate", {{"max_err", worst_adj}, {"pass", adj_ok}}},
                         {"risk_identity", {{"max_rel_err", worst_identity}, {"pass", identity_ok}}},
                         {"aux_inequalities", aux},
                         {"band_failures", band_failures},
                         {"bands", last_rows},
                         {"pass", ok}};
        write_json(o, j);
    }
    return ok ? kExitOk : kExitVerifyFailed;
}

inline int cmd_wishart(const Options& o) {
    const WishartCoverage w = wishart_coverage(o.d, o.n, o.t, o.draws, o.seed);
    write_json(o, {{"d", o.d}, {"n", o.n}, {"t", o.t}, {"band", {w.band.low, w.band.high}}, {"draws", w.draws},
                   {"inside", w.inside}, {"fraction", w.fraction}, {"threshold", w.threshold}, {"pass", w.passed()}});
    return w.passed() ? kExitOk : kExitVerifyFailed;
}

inline int cmd_sweep(const Options& o, bool trials_set, bool seed_set) {
    if (o.preset.empty() == o.spec.empty()) throw UsageError("sweep requires exactly one of --preset NAME or --spec FILE");
    SweepSpec s;
    if (!o.preset.empty()) {
        s = preset(o.preset);
    } else {
        std::ifstream is(o.spec);
        if (!is) throw UsageError("cannot open spec " + o.spec);
        s = nlohmann::json::parse(is).get<SweepSpec>();
    }
    if (trials_set) s.trials = o.trials;
    if (seed_set) s.base.seed = o.seed;
    s.block_cols = o.block_cols;
    s.threads = o.threads;
    Options out = o;
    if (out.out.empty()) out.out = s.out_path;
    const SweepResult r = run_sweep(s);
    for (const auto& l : r.log) std::cerr << l.dump() << "\n";
    write_text(out, render(r, format_from_string(o.format), s.base.seed));
    return kExitOk;
}

} // namespace cli

/// Entry point of the wgrisk command-line tool. Returns 0 on success, 1 when a verification
/// fails, 2 on usage errors.
inline int run_cli(int argc, char** argv) {
    cli::Options o;
    CLI::App app{"Group-wise risk of cost-sensitive interpolating and ridge classifiers", "wgrisk"};
    app.fallthrough();
    app.require_subcommand(0, 1);

    auto* seed_opt = app.add_option("--seed", o.seed, "Base seed");
    auto* trials_opt = app.add_option("--trials", o.trials, "Number of seeded trials")->check(CLI::PositiveNumber);
    app.add_option("--out", o.out, "Output path (default stdout)");
    app.add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--band", o.band, "Band LO,HI for main normalized primitives");
    app.add_option("--block-cols", o.block_cols, "Column block size for streaming")->check(CLI::PositiveNumber);
    app.add_option("-n", o.n, "Sample size")->check(CLI::PositiveNumber);
    app.add_option("-d", o.d, "Dimension")->check(CLI::PositiveNumber);
    app.add_option("--n-minus", o.n_minus, "Minority group size (default n/10)");
    app.add_option("--r-plus", o.r_plus, "R_+ = |mu_c|^2 + |mu_s|^2 (default d^0.6/4)");
    app.add_option("--spur-frac", o.spur_frac, "|mu_s|^2 / R_+")->check(CLI::Range(0.0, 0.5));
    app.add_option("--delta-plus", o.delta_plus, "Adjustment weight of the majority group");
    app.add_option("--delta-minus", o.delta_minus, "Adjustment weight of the minority group");
    app.add_flag("--importance", o.importance, "Use Delta_pm = n_pm / n");
    app.add_option("--tau", o.tau, "Ridge parameter")->check(CLI::NonNegativeNumber);
    app.add_option("--config", o.config, "ModelConfig JSON file");

    auto* sample = app.add_subcommand("sample", "Draw a dataset and write it to --out");
    auto* fit = app.add_subcommand("fit", "Fit an estimator and print its dual solution");
    auto* risk = app.add_subcommand("risk", "Exact group-wise risks of a fitted estimator");
    auto* bounds = app.add_subcommand("bounds", "Evaluate the risk bound exponents");
    auto* verify = app.add_subcommand("verify-primitives", "Check Woodbury, mode equivalence, the risk identity, rate bands and auxiliary inequalities");
    auto* wishart = app.add_subcommand("wishart", "Inverse-Wishart coverage experiment");
    auto* sweep = app.add_subcommand("sweep", "Run an experiment sweep");
    for (auto* sc : {fit, risk}) {
        sc->add_option("--method", o.method, "cmni, ridge or gd")->check(CLI::IsMember({"cmni", "ridge", "gd"}));
        sc->add_option("--data", o.data, "Dataset written by `sample`");
        sc->add_option("--step", o.gd_step, "Gradient descent step (default 0.9 n / lambda_max)");
        sc->add_option("--iters", o.gd_iters, "Gradient descent iteration cap");
        sc->add_option("--tol", o.gd_tol, "Gradient descent relative residual tolerance");
    }
    risk->add_option("--mc", o.mc, "Monte Carlo test draws per group");
    verify->add_flag("--strict-bands", o.strict_bands, "Fail when a normalized primitive leaves its band");
    wishart->add_option("-t", o.t, "Deviation parameter t");
    wishart->add_option("--draws", o.draws, "Number of draws")->check(CLI::PositiveNumber);
    sweep->add_option("--preset", o.preset, "fig1_left, fig1_right, fig2_left or fig2_right");
    sweep->add_option("--spec", o.spec, "SweepSpec JSON file");
    sweep->add_option("--threads", o.threads, "Worker threads (default: all cores)");

    if (argc <= 1) {
        std::cerr << app.help();
        return kExitUsage;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }
    try {
        if (sample->parsed()) return cli::cmd_sample(o);
        if (fit->parsed()) return cli::cmd_fit(o);
        if (risk->parsed()) return cli::cmd_risk(o);
        if (bounds->parsed()) return cli::cmd_bounds(o);
        if (verify->parsed()) return cli::cmd_verify(o);
        if (wishart->parsed()) return cli::cmd_wishart(o);
        if (sweep->parsed()) return cli::cmd_sweep(o, trials_opt->count() > 0, seed_opt->count() > 0);
        std::cerr << app.help();
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "wgrisk: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "wgrisk: " << e.what() << "\n";
        return kExitVerifyFailed;
    }
}

} // namespace wgrisk
