#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "wgrisk/bounds.hpp"
#include "wgrisk/estimators.hpp"
#include "wgrisk/model.hpp"
#include "wgrisk/primitives.hpp"
#include "wgrisk/risk.hpp"
#include "wgrisk/rng.hpp"

namespace wgrisk {

inline constexpr const char* kVersion = "wgrisk 0.1.0";
inline constexpr int kSchemaVersion = 1;

enum class Axis { delta_minus, tau, r_plus_sq, n };

inline const char* to_string(Axis a) {
    switch (a) {
    case Axis::delta_minus: return "delta_minus";
    case Axis::tau: return "tau";
    case Axis::r_plus_sq: return "r_plus_sq";
    case Axis::n: return "n";
    }
    return "?";
}

inline Axis axis_from_string(const std::string& s) {
    if (s == "delta_minus") return Axis::delta_minus;
    if (s == "tau") return Axis::tau;
    if (s == "r_plus_sq") return Axis::r_plus_sq;
    if (s == "n") return Axis::n;
    throw std::invalid_argument("unknown sweep axis: " + s);
}

enum class Output { risk, bounds, primitives, tightness };

inline const char* to_string(Output o) {
    switch (o) {
    case Output::risk: return "risk";
    case Output::bounds: return "bounds";
    case Output::primitives: return "primitives";
    case Output::tightness: return "tightness";
    }
    return "?";
}

inline Output output_from_string(const std::string& s) {
    if (s == "risk") return Output::risk;
    if (s == "bounds") return Output::bounds;
    if (s == "primitives") return Output::primitives;
    if (s == "tightness") return Output::tightness;
    throw std::invalid_argument("unknown sweep output: " + s);
}

/// One estimator in a sweep. For ridge, tau is absolute or, with tau_per_d, a multiple of d.
struct MethodSpec {
    Method method = Method::cmni;
    double tau = 0.0;
    bool tau_per_d = false;

    double resolve_tau(int d) const { return method == Method::ridge ? (tau_per_d ? tau * d : tau) : 0.0; }
    std::string label() const {
        if (method != Method::ridge) return to_string(method);
        std::ostringstream os;
        os << "ridge(tau=" << tau << (tau_per_d ? "*d" : "") << ")";
        return os.str();
    }
};

struct SweepSpec {
    std::string name = "sweep";
    ModelConfig base;
    Axis axis = Axis::delta_minus;
    std::vector<double> values;
    std::vector<MethodSpec> methods{MethodSpec{}};
    int trials = 1;
    std::vector<Output> outputs{Output::risk, Output::bounds, Output::tightness};
    std::string out_path;
    /// Delta_pm = n_pm / n at every derived point (n and r_plus_sq axes).
    bool importance = false;
    /// |mu_s|^2 / R_+ when the axis rescales the means.
    double spur_frac = 0.5;
    int block_cols = 4096;
    int threads = 0;   // 0 = hardware concurrency

    bool wants(Output o) const { return std::find(outputs.begin(), outputs.end(), o) != outputs.end(); }
};

struct SweepRow {
    std::string run_id;
    std::string axis;
    double axis_value = 0.0;
    std::string method;
    double tau = 0.0;
    int group = 1;
    int trials = 0;      // successful trials aggregated
    int failures = 0;
    double risk_mean = 0.0, risk_std = 0.0;
    double worst_mean = 0.0, worst_std = 0.0;
    double avg_mean = 0.0, avg_std = 0.0;
    double exponent_mean = 0.0, exponent_std = 0.0;
    double bound_exponent = NAN;
    double tightness_mean = NAN, tightness_std = NAN;
    double identity_err_max = NAN;
};

struct SweepResult {
    std::string run_id;
    std::vector<SweepRow> rows;
    std::vector<nlohmann::json> log;   // one object per skipped point or failed fit
};

// ---------------------------------------------------------------------------
// Derived configurations

/// Config at one axis value, or an error message when it cannot be built.
inline ModelConfig derive_config(const SweepSpec& spec, double v) {
    ModelConfig c = spec.base;
    switch (spec.axis) {
    case Axis::delta_minus:
        c.delta_minus = v;
        break;
    case Axis::tau:
        c.tau = v;
        break;
    case Axis::r_plus_sq: {
        const ModelConfig m = ModelConfig::aligned(c.d(), c.n(), c.n_minus, std::sqrt(v), spec.spur_frac);
        c.mu_core = m.mu_core;
        c.mu_spur = m.mu_spur;
        c.d_core = m.d_core;
        c.d_spur = m.d_spur;
        break;
    }
    case Axis::n: {
        const int n = static_cast<int>(std::lround(v));
        const int d = 2 * n * n;
        const int n_minus = std::max(1, static_cast<int>(std::lround(0.04 * n)));
        const double r_plus = std::pow(static_cast<double>(d), 0.6) / 4.0;
        ModelConfig m = ModelConfig::aligned(d, n, n_minus, r_plus, spec.spur_frac);
        m.pi_plus = c.pi_plus;
        m.seed = c.seed;
        m.tau = c.tau;
        m.delta_plus = c.delta_plus;
        m.delta_minus = c.delta_minus;
        c = m;
        break;
    }
    }
    if (spec.importance) c.importance_weights();
    return c;
}

namespace detail {

struct TrialOutcome {
    bool ok = false;
    double risk[2] = {0, 0};   // plus, minus
    double exponent[2] = {0, 0};
    double worst = 0.0;
    double avg = 0.0;
    double identity_err = NAN;
};

struct NoiseCacheEntry {
    int n_plus, n_minus, d;
    double pi_plus;
    ModelConfig origin;
    NoiseStats stats;
};

inline bool parallel_unit(const VectorXd& a, const VectorXd& b) {
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) return false;
    return (a / na - b / nb).norm() <= 1e-12;
}

/// Noise statistics for `c`, reusing a cached pass over Q when only the mean magnitudes differ.
/// Returns (stats, core_scale, spur_scale).
inline std::tuple<const NoiseStats*, double, double> cached_noise(std::vector<NoiseCacheEntry>& cache, const ModelConfig& c, int block_cols) {
    for (const auto& e : cache) {
        if (e.n_plus != c.n_plus || e.n_minus != c.n_minus || e.d != c.d() || e.pi_plus != c.pi_plus) continue;
        if (e.origin.d_core != c.d_core) continue;
        if (!parallel_unit(e.origin.mu_core, c.mu_core) || !parallel_unit(e.origin.mu_spur, c.mu_spur)) continue;
        return {&e.stats, c.mu_core.norm() / e.origin.mu_core.norm(), c.mu_spur.norm() / e.origin.mu_spur.norm()};
    }
    cache.push_back({c.n_plus, c.n_minus, c.d(), c.pi_plus, c, noise_stats(c, block_cols)});
    return {&cache.back().stats, 1.0, 1.0};
}

inline double mean_of(const std::vector<double>& x) {
    if (x.empty()) return NAN;
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

/// Sample standard deviation; 0 for a single observation.
inline double std_of(const std::vector<double>& x) {
    if (x.size() < 2) return x.empty() ? NAN : 0.0;
    const double m = mean_of(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(x.size() - 1));
}

inline std::string hex_seed(std::uint64_t s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(s));
    return buf;
}

} // namespace detail

/// Runs every (axis value, trial, method) cell. Trials are spread over a worker pool; each worker
/// owns its noise cache, and results land in fixed slots so the reduction order never changes.
inline SweepResult run_sweep(const SweepSpec& spec) {
    if (spec.trials < 1) throw std::invalid_argument("run_sweep: trials must be at least 1");
    if (spec.values.empty()) throw std::invalid_argument("run_sweep: axis has no values");
    if (spec.methods.empty()) throw std::invalid_argument("run_sweep: no methods");
    detail::check_block(spec.block_cols);

    SweepResult res;
    res.run_id = spec.name + "-" + detail::hex_seed(spec.base.seed);
    const std::size_t np = spec.values.size(), nm = spec.methods.size(), nt = static_cast<std::size_t>(spec.trials);

    std::vector<std::optional<ModelConfig>> configs(np);
    for (std::size_t p = 0; p < np; ++p) {
        try {
            ModelConfig c = derive_config(spec, spec.values[p]);
            c.validate();
            configs[p] = c;
        } catch (const std::exception& e) {
            res.log.push_back({{"event", "skip"}, {"axis", to_string(spec.axis)}, {"axis_value", spec.values[p]}, {"reason", e.what()}});
        }
    }

    std::vector<detail::TrialOutcome> out(np * nm * nt);
    std::vector<std::vector<nlohmann::json>> trial_log(nt);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t t; (t = next.fetch_add(1)) < nt;) {
            std::vector<detail::NoiseCacheEntry> cache;
            const std::uint64_t seed = trial_seed(spec.base.seed, t);
            for (std::size_t p = 0; p < np; ++p) {
                if (!configs[p]) continue;
                ModelConfig c = *configs[p];
                c.seed = seed;
                try {
                    auto [ns, cs, ss] = detail::cached_noise(cache, c, spec.block_cols);
                    const Labels labels = sample_labels(c);
                    const GramStats g = assemble_gram(*ns, labels, cs, ss);
                    const AdjustmentWeights w = AdjustmentWeights::of(c);
                    for (std::size_t m = 0; m < nm; ++m) {
                        auto& o = out[(p * nm + m) * nt + t];
                        const MethodSpec& ms = spec.methods[m];
                        const double tau = spec.axis == Axis::tau && ms.method == Method::ridge ? c.tau : ms.resolve_tau(c.d());
                        try {
                            DualSolution sol = ms.method == Method::gd ? fit_gd(g, w, labels)
                                               : ms.method == Method::cmni ? fit_cmni(g, w, labels)
                                                                            : fit_ridge(g, w, labels, tau);
                            const RiskReport r = risk_report(sol, c);
                            o.risk[0] = r.plus.risk;
                            o.risk[1] = r.minus.risk;
                            o.exponent[0] = r.plus.exponent;
                            o.exponent[1] = r.minus.exponent;
                            o.worst = r.worst_risk;
                            o.avg = r.avg_risk;
                            if (spec.wants(Output::primitives)) {
                                const Decomposition dec = build_decomposition(*ns, labels, sol.tau, cs, ss);
                                const PrimitiveSet ps = compute_primitives(dec, c, w, unit_vector(c.n()), PrimitiveMode::recursive);
                                o.identity_err = std::max(risk_identity_check(ps, sol, 1), risk_identity_check(ps, sol, -1));
                            }
                            o.ok = true;
                        } catch (const std::exception& e) {
                            trial_log[t].push_back({{"event", "fit_failure"}, {"axis_value", spec.values[p]}, {"method", ms.label()},
                                                    {"trial", t}, {"reason", e.what()}});
                        }
                    }
                } catch (const std::exception& e) {
                    trial_log[t].push_back({{"event", "trial_failure"}, {"axis_value", spec.values[p]}, {"trial", t}, {"reason", e.what()}});
                }
            }
        }
    };
    unsigned nthreads = spec.threads > 0 ? static_cast<unsigned>(spec.threads) : std::max(1u, std::thread::hardware_concurrency());
    nthreads = std::min<unsigned>(nthreads, static_cast<unsigned>(nt));
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < nthreads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (auto& l : trial_log)
        for (auto& j : l) res.log.push_back(std::move(j));

    for (std::size_t p = 0; p < np; ++p) {
        if (!configs[p]) continue;
        const ModelConfig& c = *configs[p];
        for (std::size_t m = 0; m < nm; ++m) {
            const MethodSpec& ms = spec.methods[m];
            std::vector<double> worst, avg, idn;
            std::vector<double> risk[2], expo[2];
            int failures = 0;
            for (std::size_t t = 0; t < nt; ++t) {
                const auto& o = out[(p * nm + m) * nt + t];
                if (!o.ok) {
                    ++failures;
                    continue;
                }
                worst.push_back(o.worst);
                avg.push_back(o.avg);
                for (int g = 0; g < 2; ++g) {
                    risk[g].push_back(o.risk[g]);
                    expo[g].push_back(o.exponent[g]);
                }
                if (!std::isnan(o.identity_err)) idn.push_back(o.identity_err);
            }
            for (int g = 0; g < 2; ++g) {
                const int b = g == 0 ? 1 : -1;
                SweepRow row;
                row.run_id = res.run_id;
                row.axis = to_string(spec.axis);
                row.axis_value = spec.values[p];
                row.method = ms.label();
                row.tau = spec.axis == Axis::tau && ms.method == Method::ridge ? c.tau : ms.resolve_tau(c.d());
                row.group = b;
                row.trials = static_cast<int>(worst.size());
                row.failures = failures;
                if (spec.wants(Output::risk)) {
                    row.risk_mean = detail::mean_of(risk[g]);
                    row.risk_std = detail::std_of(risk[g]);
                    row.worst_mean = detail::mean_of(worst);
                    row.worst_std = detail::std_of(worst);
                    row.avg_mean = detail::mean_of(avg);
                    row.avg_std = detail::std_of(avg);
                }
                row.exponent_mean = detail::mean_of(expo[g]);
                row.exponent_std = detail::std_of(expo[g]);
                const double e = bound_exponent(c, b);
                if (spec.wants(Output::bounds) || spec.wants(Output::tightness)) row.bound_exponent = e;
                if (spec.wants(Output::tightness) && e > 0.0) {
                    std::vector<double> ratio;
                    for (double x : expo[g]) ratio.push_back(x / e);
                    row.tightness_mean = detail::mean_of(ratio);
                    row.tightness_std = detail::std_of(ratio);
                }
                if (!idn.empty()) row.identity_err_max = *std::max_element(idn.begin(), idn.end());
                res.rows.push_back(std::move(row));
            }
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Presets

/// log-spaced grid from `hi` down to `lo` (count points), then `extra` further points at the same ratio.
inline std::vector<double> log_grid_down(double hi, double lo, int count, int extra) {
    std::vector<double> g;
    const double r = std::pow(lo / hi, 1.0 / (count - 1));
    for (int i = 0; i < count; ++i) g.push_back(i == count - 1 ? lo : hi * std::pow(r, i));
    for (int i = 1; i <= extra; ++i) g.push_back(lo * std::pow(r, i));
    return g;
}

inline SweepSpec preset(const std::string& name) {
    SweepSpec s;
    s.name = name;
    if (name == "fig1_left") {
        const int d = 100000, n = 200, n_minus = 10;
        s.base = ModelConfig::aligned(d, n, n_minus, std::pow(static_cast<double>(d), 0.6) / 4.0);
        s.base.delta_plus = static_cast<double>(n - n_minus) / n;
        s.base.delta_minus = s.base.delta_plus;
        s.axis = Axis::delta_minus;
        s.values = log_grid_down(static_cast<double>(n - n_minus) / n, static_cast<double>(n_minus) / n, 20, 3);
        s.methods = {MethodSpec{Method::cmni}};
        s.trials = 10;
    } else if (name == "fig1_right") {
        s.base = ModelConfig::aligned(2 * 50 * 50, 50, 2, 1.0);
        s.axis = Axis::n;
        s.values = {50, 100, 150, 200, 250};
        s.methods = {MethodSpec{Method::cmni}, MethodSpec{Method::ridge, 0.1, true}, MethodSpec{Method::ridge, 1.0, true}};
        s.importance = true;
        s.trials = 10;
    } else if (name == "fig2_left" || name == "fig2_right") {
        const int d = 100000, n = 200, n_minus = 10;
        s.base = ModelConfig::aligned(d, n, n_minus, std::pow(static_cast<double>(d), 0.6) / 4.0);
        s.axis = Axis::r_plus_sq;
        s.values = {500, 1000, 2000, 5000, 1e4, 1.5e4, 2e4, 3e4, 5e4, 7e4, 1e5, 1.5e5, 2e5};
        s.methods = {MethodSpec{Method::cmni}};
        s.importance = name == "fig2_right";
        if (s.importance) s.base.importance_weights();
        s.trials = 10;
    } else {
        throw std::invalid_argument("unknown preset: " + name + " (expected fig1_left, fig1_right, fig2_left, fig2_right)");
    }
    return s;
}

// ---------------------------------------------------------------------------
// Serialization

inline void to_json(nlohmann::json& j, const MethodSpec& m) {
    j = nlohmann::json{{"method", to_string(m.method)}, {"tau", m.tau}, {"tau_per_d", m.tau_per_d}};
}

inline void from_json(const nlohmann::json& j, MethodSpec& m) {
    m.method = method_from_string(j.at("method").get<std::string>());
    m.tau = j.value("tau", 0.0);
    m.tau_per_d = j.value("tau_per_d", false);
}

inline void to_json(nlohmann::json& j, const SweepSpec& s) {
    std::vector<std::string> outs;
    for (Output o : s.outputs) outs.emplace_back(to_string(o));
    j = nlohmann::json{{"name", s.name},         {"base", s.base},           {"axis", to_string(s.axis)},
                       {"values", s.values},     {"methods", s.methods},     {"trials", s.trials},
                       {"outputs", outs},        {"out_path", s.out_path},   {"importance", s.importance},
                       {"spur_frac", s.spur_frac}, {"block_cols", s.block_cols}};
}

inline void from_json(const nlohmann::json& j, SweepSpec& s) {
    s.name = j.value("name", std::string("sweep"));
    s.base = j.at("base").get<ModelConfig>();
    s.axis = axis_from_string(j.at("axis").get<std::string>());
    s.values = j.at("values").get<std::vector<double>>();
    if (j.contains("methods")) s.methods = j.at("methods").get<std::vector<MethodSpec>>();
    s.trials = j.value("trials", 1);
    if (j.contains("outputs")) {
        s.outputs.clear();
        for (const auto& o : j.at("outputs")) s.outputs.push_back(output_from_string(o.get<std::string>()));
    }
    s.out_path = j.value("out_path", std::string());
    s.importance = j.value("importance", false);
    s.spur_frac = j.value("spur_frac", 0.5);
    s.block_cols = j.value("block_cols", 4096);
}

namespace detail {

// NaN is written as null so the documents stay valid JSON.
inline nlohmann::json num(double x) { return std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x); }
inline double num_from(const nlohmann::json& j) { return j.is_null() ? NAN : j.get<double>(); }

inline std::string fmt(double x) {
    if (std::isnan(x)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

} // namespace detail

inline void to_json(nlohmann::json& j, const SweepRow& r) {
    using detail::num;
    j = nlohmann::json{{"run_id", r.run_id},
                       {"axis", r.axis},
                       {"axis_value", r.axis_value},
                       {"method", r.method},
                       {"tau", r.tau},
                       {"group", r.group},
                       {"trials", r.trials},
                       {"failures", r.failures},
                       {"risk_mean", num(r.risk_mean)},
                       {"risk_std", num(r.risk_std)},
                       {"worst_mean", num(r.worst_mean)},
                       {"worst_std", num(r.worst_std)},
                       {"avg_mean", num(r.avg_mean)},
                       {"avg_std", num(r.avg_std)},
                       {"exponent_mean", num(r.exponent_mean)},
                       {"exponent_std", num(r.exponent_std)},
                       {"bound_exponent", num(r.bound_exponent)},
                       {"tightness_mean", num(r.tightness_mean)},
                       {"tightness_std", num(r.tightness_std)},
                       {"identity_err_max", num(r.identity_err_max)}};
}

inline void from_json(const nlohmann::json& j, SweepRow& r) {
    using detail::num_from;
    r.run_id = j.at("run_id").get<std::string>();
    r.axis = j.at("axis").get<std::string>();
    r.axis_value = j.at("axis_value").get<double>();
    r.method = j.at("method").get<std::string>();
    r.tau = j.at("tau").get<double>();
    r.group = j.at("group").get<int>();
    r.trials = j.at("trials").get<int>();
    r.failures = j.at("failures").get<int>();
    r.risk_mean = num_from(j.at("risk_mean"));
    r.risk_std = num_from(j.at("risk_std"));
    r.worst_mean = num_from(j.at("worst_mean"));
    r.worst_std = num_from(j.at("worst_std"));
    r.avg_mean = num_from(j.at("avg_mean"));
    r.avg_std = num_from(j.at("avg_std"));
    r.exponent_mean = num_from(j.at("exponent_mean"));
    r.exponent_std = num_from(j.at("exponent_std"));
    r.bound_exponent = num_from(j.at("bound_exponent"));
    r.tightness_mean = num_from(j.at("tightness_mean"));
    r.tightness_std = num_from(j.at("tightness_std"));
    r.identity_err_max = num_from(j.at("identity_err_max"));
}

/// Frozen CSV column order.
inline const std::vector<std::string>& csv_header() {
    static const std::vector<std::string> h{"run_id",        "axis",          "axis_value",    "method",        "tau",
                                            "group",         "trials",        "failures",      "risk_mean",     "risk_std",
                                            "worst_mean",    "worst_std",     "avg_mean",      "avg_std",       "exponent_mean",
                                            "exponent_std",  "bound_exponent", "tightness_mean", "tightness_std", "identity_err_max"};
    return h;
}

inline std::string to_csv(const std::vector<SweepRow>& rows) {
    using detail::fmt;
    std::ostringstream os;
    const auto& h = csv_header();
    for (std::size_t i = 0; i < h.size(); ++i) os << (i ? "," : "") << h[i];
    os << '\n';
    for (const auto& r : rows) {
        os << r.run_id << ',' << r.axis << ',' << fmt(r.axis_value) << ',' << '"' << r.method << '"' << ',' << fmt(r.tau) << ','
           << r.group << ',' << r.trials << ',' << r.failures << ',' << fmt(r.risk_mean) << ',' << fmt(r.risk_std) << ','
           << fmt(r.worst_mean) << ',' << fmt(r.worst_std) << ',' << fmt(r.avg_mean) << ',' << fmt(r.avg_std) << ','
           << fmt(r.exponent_mean) << ',' << fmt(r.exponent_std) << ',' << fmt(r.bound_exponent) << ','
           << fmt(r.tightness_mean) << ',' << fmt(r.tightness_std) << ',' << fmt(r.identity_err_max) << '\n';
    }
    return os.str();
}

/// ISO-8601 UTC time; SOURCE_DATE_EPOCH pins it for reproducible artifacts.
inline std::string run_timestamp() {
    std::time_t t = std::time(nullptr);
    if (const char* e = std::getenv("SOURCE_DATE_EPOCH")) t = static_cast<std::time_t>(std::strtoll(e, nullptr, 10));
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline nlohmann::json table_json(const SweepResult& r, std::uint64_t seed) {
    return nlohmann::json{{"schema_version", kSchemaVersion},
                          {"metadata", {{"version", kVersion}, {"seed", seed}, {"generator", CounterRng::kName}, {"timestamp", run_timestamp()}, {"run_id", r.run_id}}},
                          {"rows", r.rows}};
}

inline std::vector<SweepRow> rows_from_json(const nlohmann::json& j) {
    if (j.value("schema_version", 0) != kSchemaVersion) throw std::runtime_error("rows_from_json: unsupported schema version");
    return j.at("rows").get<std::vector<SweepRow>>();
}

enum class Format { csv, json };

inline Format format_from_string(const std::string& s) {
    if (s == "csv") return Format::csv;
    if (s == "json") return Format::json;
    throw std::invalid_argument("unknown format: " + s);
}

inline std::string render(const SweepResult& r, Format f, std::uint64_t seed) {
    if (r.rows.empty()) throw std::runtime_error("emit: result table is empty");
    return f == Format::csv ? to_csv(r.rows) : table_json(r, seed).dump(2) + "\n";
}

inline void emit(const SweepResult& r, Format f, std::uint64_t seed, const std::filesystem::path& path) {
    const std::string text = render(r, f, seed);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("emit: cannot open " + path.string());
    os << text;
    if (!os) throw std::runtime_error("emit: write failed for " + path.string());
}

} // namespace wgrisk
