// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "wgrisk/wgrisk.hpp"

using namespace wgrisk;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = budget_s <= 0.0 || secs <= budget_s;
    const bool pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    std::printf("%s [%2d] %s: %s (%.1f s%s)\n", pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs,
                in_time ? "" : fmt(", over %.0f s budget", budget_s).c_str());
    std::fflush(stdout);
}

void info(const std::string& s) {
    std::printf("INFO      %s\n", s.c_str());
    std::fflush(stdout);
}

// Shared instance grid for the identity criteria.
struct Instance {
    int n, d;
    double tau;
    std::uint64_t seed;
};

std::vector<Instance> identity_grid(const std::vector<double>& taus) {
    std::vector<Instance> g;
    for (auto [n, d] : {std::pair{20, 400}, std::pair{50, 2000}})
        for (double tau : taus)
            for (std::uint64_t s = 0; s < 20; ++s) g.push_back({n, d, tau, 1000 + s});
    return g;
}

ModelConfig instance_config(const Instance& in, bool importance) {
    ModelConfig c = ModelConfig::aligned(in.d, in.n, in.n / 10, std::pow(static_cast<double>(in.d), 0.6) / 4.0, 0.3);
    c.tau = in.tau;
    c.seed = in.seed;
    if (importance) c.importance_weights();
    return c;
}

double rel_frobenius(const MatrixXd& a, const MatrixXd& b) { return (a - b).norm() / b.norm(); }

// Regime of the rate criteria: n = 30, d = 30000, |mu_c|^2 = core_sq, |mu_s|^2 = core_sq / 4.
ModelConfig rate_config(double core_sq, double tau, std::uint64_t seed) {
    ModelConfig c = ModelConfig::aligned(30000, 30, 3, 0.0);
    c.mu_core[0] = std::sqrt(core_sq);
    c.mu_spur[0] = std::sqrt(core_sq / 4.0);
    c.tau = tau;
    c.seed = seed;
    c.importance_weights();
    return c;
}

struct RateSummary {
    int seeds = 0;
    int main_ok = 0, cross_ok = 0, det_ok = 0;
    double main_lo = INFINITY, main_hi = -INFINITY, cross_abs = 0.0, det_lo = INFINITY, det_hi = -INFINITY;
};

RateSummary rate_experiment(double core_sq, double tau, int seeds) {
    RateSummary s;
    for (int i = 0; i < seeds; ++i) {
        const ModelConfig c = rate_config(core_sq, tau, 5000 + static_cast<std::uint64_t>(i));
        const Dataset ds = sample_dataset(c);
        const PrimitiveSet ps = compute_primitives(build_decomposition(ds, tau), c, AdjustmentWeights::of(c), unit_vector(c.n()), PrimitiveMode::recursive);
        bool main_ok = true, cross_ok = true, det_ok = true;
        for (const auto& r : verify_primitive_bounds(ps)) {
            const bool is_s_ii = r.name.size() == 4 && r.name[0] == 's' && r.name[2] == r.name[3];
            const bool is_s_dd = r.name.size() == 7 && r.name.rfind("s_", 0) == 0 && r.name[3] == 'D' && r.name[6] == 'D' && r.name[2] == r.name[5];
            const bool is_o = r.main && r.name.rfind("o_", 0) == 0;
            if (r.name == "det_A") {
                s.det_lo = std::min(s.det_lo, r.value);
                s.det_hi = std::max(s.det_hi, r.value);
                det_ok = det_ok && r.value >= 0.5 && r.value <= 2.0;
            } else if (is_s_ii || is_s_dd || is_o) {
                s.main_lo = std::min(s.main_lo, r.normalized);
                s.main_hi = std::max(s.main_hi, r.normalized);
                main_ok = main_ok && r.normalized >= 0.5 && r.normalized <= 2.0;
            } else if (!r.main) {
                s.cross_abs = std::max(s.cross_abs, std::abs(r.normalized));
                cross_ok = cross_ok && std::abs(r.normalized) <= 2.0;
            }
        }
        ++s.seeds;
        s.main_ok += main_ok;
        s.cross_ok += cross_ok;
        s.det_ok += det_ok;
    }
    return s;
}

} // namespace

int main() {
    std::printf("wgrisk acceptance (%s, generator %s)\n", kVersion, CounterRng::kName);

    criterion(1, "Woodbury equivalence", 30.0, [] {
        double worst = 0.0;
        int count = 0;
        for (const Instance& in : identity_grid({0.0, 1.0, 100.0})) {
            const Dataset ds = sample_dataset(instance_config(in, true));
            const WoodburyResult wb = woodbury_invert(build_decomposition(ds, in.tau));
            MatrixXd m = ds.X * ds.X.transpose();
            m.diagonal().array() += in.tau;
            worst = std::max(worst, rel_frobenius(wb.inverse[2], m.inverse()));
            ++count;
        }
        return Outcome{worst <= 1e-8, fmt("max relative Frobenius error %.2e over %d instances (tol 1e-8)", worst, count)};
    });

    criterion(2, "Primitive mode equivalence", 60.0, [] {
        double worst = 0.0;
        int count = 0;
        for (const Instance& in : identity_grid({0.0, 1.0, 100.0})) {
            const ModelConfig c = instance_config(in, true);
            const Dataset ds = sample_dataset(c);
            const Decomposition dec = build_decomposition(ds, in.tau);
            const VectorXd u = unit_vector(c.n());
            const PrimitiveSet a = compute_primitives(dec, c, AdjustmentWeights::of(c), u, PrimitiveMode::direct);
            const PrimitiveSet b = compute_primitives(dec, c, AdjustmentWeights::of(c), u, PrimitiveMode::recursive);
            worst = std::max(worst, max_relative_discrepancy(a, b));
            ++count;
        }
        return Outcome{worst <= 1e-8, fmt("max relative entry discrepancy %.2e over %d instances (tol 1e-8)", worst, count)};
    });

    criterion(3, "Risk identity", 30.0, [] {
        double worst = 0.0;
        int count = 0;
        for (const Instance& in : identity_grid({0.0, 5.0}))
            for (bool importance : {false, true}) {
                const ModelConfig c = instance_config(in, importance);
                const Dataset ds = sample_dataset(c);
                const AdjustmentWeights w = AdjustmentWeights::of(c);
                const PrimitiveSet ps = compute_primitives(build_decomposition(ds, in.tau), c, w, unit_vector(c.n()), PrimitiveMode::recursive);
                const DualSolution sol = fit_ridge(accumulate_gram(ds, 4096), w, ds.labels, in.tau);
                for (int b : {1, -1}) worst = std::max(worst, risk_identity_check(ps, sol, b));
                count += 2;
            }
        return Outcome{worst <= 1e-8, fmt("max relative error %.2e over %d (instance, group) pairs (tol 1e-8)", worst, count)};
    });

    criterion(4, "Interpolation", 0.0, [] {
        double resid = 0.0, agree = 0.0;
        int count = 0;
        for (const Instance& in : identity_grid({0.0}))
            for (bool importance : {false, true}) {
                const ModelConfig c = instance_config(in, importance);
                const Dataset ds = sample_dataset(c);
                const AdjustmentWeights w = AdjustmentWeights::of(c);
                const GramStats g = accumulate_gram(ds, 4096);
                const DualSolution mni = fit_cmni(g, w, ds.labels);
                resid = std::max(resid, interpolation_residual(mni, g, w, ds.labels));
                // ridge at tau = 0 against the recursive Woodbury inverse applied to Delta^{-1} y
                const DualSolution r0 = fit_ridge(g, w, ds.labels, 0.0);
                const VectorXd c_wb = woodbury_invert(build_decomposition(ds, 0.0)).inverse[2] * ds.labels.delta_inv(w.plus, w.minus).cwiseProduct(ds.labels.y);
                agree = std::max({agree, (r0.c - mni.c).norm() / mni.c.norm(), (c_wb - mni.c).norm() / mni.c.norm()});
                ++count;
            }
        return Outcome{resid <= 1e-8 && agree <= 1e-10,
                       fmt("max residual %.2e (tol 1e-8), ridge(0)/Woodbury vs cMNI %.2e (tol 1e-10), %d instances", resid, agree, count)};
    });

    criterion(5, "GD implicit bias", 60.0, [] {
        double worst = 0.0;
        int iters = 0;
        for (std::uint64_t s = 0; s < 5; ++s) {
            const ModelConfig c = instance_config({20, 400, 0.0, 2000 + s}, true);
            const Dataset ds = sample_dataset(c);
            const GramStats g = accumulate_gram(ds, 4096);
            const AdjustmentWeights w = AdjustmentWeights::of(c);
            const DualSolution gd = fit_gd(g, w, ds.labels, GdOptions{0.0, 100000, 1e-12});
            const DualSolution mni = fit_cmni(g, w, ds.labels);
            worst = std::max(worst, (gd.c - mni.c).norm() / mni.c.norm());
            iters = std::max(iters, gd.iterations);
        }
        return Outcome{worst <= 1e-4 && iters <= 100000, fmt("max |c_gd - c_cmni|/|c_cmni| %.2e (tol 1e-4), max iterations %d", worst, iters)};
    });

    criterion(6, "Wishart coverage", 60.0, [] {
        const WishartCoverage w = wishart_coverage(1000, 10, 4.6, 1000, 6);
        return Outcome{w.passed(), fmt("%d/%d inside [%.2f, %.2f], fraction %.3f >= threshold %.4f", w.inside, w.draws, w.band.low, w.band.high,
                                       w.fraction, w.threshold)};
    });

    std::vector<RateSummary> rates;
    criterion(7, "Primitive-rate bands", 300.0, [&] {
        bool ok = true;
        std::string detail;
        for (double tau : {0.0, 30000.0}) {
            const RateSummary s = rate_experiment(9000.0, tau, 100);
            rates.push_back(s);
            ok = ok && s.main_ok >= 99 && s.cross_ok >= 99;
            detail += fmt("%stau=%g: main in [0.5,2] on %d/100 seeds (range %.3f..%.3f), cross in [-2,2] on %d/100 (max |.| %.3f)",
                          detail.empty() ? "" : "; ", tau, s.main_ok, s.main_lo, s.main_hi, s.cross_ok, s.cross_abs);
        }
        return Outcome{ok, detail};
    });

    criterion(8, "det(A_k) band", 0.0, [&] {
        if (rates.size() != 2) return Outcome{false, "rate experiment did not run"};
        bool ok = true;
        std::string detail;
        const double taus[2] = {0.0, 30000.0};
        for (int i = 0; i < 2; ++i) {
            ok = ok && rates[i].det_ok == rates[i].seeds;
            detail += fmt("%stau=%g: det in [0.5,2] on %d/%d seeds (range %.3f..%.3f)", i ? "; " : "", taus[i], rates[i].det_ok, rates[i].seeds,
                          rates[i].det_lo, rates[i].det_hi);
        }
        return Outcome{ok, detail};
    });

    {
        // Same checks with n |mu_c|^2 / d = 0.2 instead of 9.
        for (double tau : {0.0, 30000.0}) {
            const RateSummary s = rate_experiment(200.0, tau, 100);
            info(fmt("rate bands at |mu_c|^2=200, tau=%g: main %d/100 (%.3f..%.3f), cross %d/100 (max |.| %.3f), det %d/100 (%.3f..%.3f)", tau,
                     s.main_ok, s.main_lo, s.main_hi, s.cross_ok, s.cross_abs, s.det_ok, s.det_lo, s.det_hi));
        }
    }

    criterion(9, "Figure-1-left trend", 900.0, [] {
        const SweepSpec spec = preset("fig1_left");
        const SweepResult r = run_sweep(spec);
        std::vector<double> minority, majority, worst, grid;
        for (const auto& row : r.rows) {
            if (row.group == 1) {
                majority.push_back(row.risk_mean);
                worst.push_back(row.worst_mean);
                grid.push_back(row.axis_value);
            } else {
                minority.push_back(row.risk_mean);
            }
        }
        if (grid.size() != spec.values.size()) return Outcome{false, "sweep dropped grid points"};
        const double target = 10.0 / 200.0;
        std::size_t at = 0;
        while (at < grid.size() && std::abs(grid[at] - target) > 1e-12) ++at;
        int violations = 0;
        for (std::size_t i = 1; i <= at; ++i) violations += minority[i] > minority[i - 1];
        const auto best = static_cast<std::size_t>(std::min_element(worst.begin(), worst.end()) - worst.begin());
        const bool argmin_ok = grid[best] >= target / 2 && grid[best] <= target * 2;
        bool below_ok = at + 1 < grid.size();
        for (std::size_t i = at + 1; i < grid.size(); ++i) below_ok = below_ok && majority[i] > majority[at];
        return Outcome{violations <= 1 && argmin_ok && below_ok,
                       fmt("minority monotonicity violations %d (<= 1); worst-group argmin at Delta_-=%.4f (target 0.05, factor 2); "
                           "majority below 0.05 exceeds %.4f: %s",
                           violations, grid[best], majority[at], below_ok ? "yes" : "no")};
    });

    SweepResult fig2_right;
    criterion(10, "Figure-2 thresholds", 1200.0, [&] {
        const SweepResult left = run_sweep(preset("fig2_left"));
        fig2_right = run_sweep(preset("fig2_right"));
        auto risk_at = [](const SweepResult& r, double v, int group) -> double {
            for (const auto& row : r.rows)
                if (std::abs(row.axis_value - v) < 1e-9 && row.group == group) return row.risk_mean;
            return NAN;
        };
        const double d = 1e5, n = 200, n_minus = 10;
        const double lp = risk_at(left, d / n, 1), lm = risk_at(left, d / n, -1);
        const double rp = risk_at(fig2_right, 10 * d / n_minus, 1), rm = risk_at(fig2_right, 10 * d / n_minus, -1);
        const bool ok = lp <= 0.05 && lm >= 0.1 && rp <= 0.05 && rm <= 0.05;
        const double lm_end = risk_at(left, d * n / (n_minus * n_minus), -1);
        return Outcome{ok, fmt("Delta=1 at R+^2=d/n: majority %.4f (<= 0.05), minority %.4f (>= 0.1); "
                               "Delta_pm=n_pm/n at R+^2=10d/n_-: majority %.4f, minority %.4f (<= 0.05); [minority at dn/n_-^2: %.4f]",
                               lp, lm, rp, rm, lm_end)};
    });

    criterion(11, "Bound tightness", 0.0, [&] {
        if (fig2_right.rows.empty()) fig2_right = run_sweep(preset("fig2_right"));
        std::vector<double> ratios;
        for (const auto& row : fig2_right.rows)
            if (row.bound_exponent >= 1.0 && row.bound_exponent <= 30.0) ratios.push_back(row.tightness_mean);
        const ConstantBand band = fit_constant_band(ratios);
        const bool ok = ratios.size() >= 2 && band.lo > 0.0 && band.spread() <= 10.0;
        return Outcome{ok, fmt("%zu (point, group) pairs with E_b in [1,30]; ratio band [%.4f, %.4f], max/min %.3f (<= 10)", ratios.size(), band.lo, band.hi,
                               band.spread())};
    });

    criterion(12, "Auxiliary inequalities", 5.0, [] {
        int l7 = 0, l7_ok = 0, l4 = 0, l4_ok = 0;
        double l7_worst = 0.0;
        for (int n : {10, 100, 1000}) {
            std::vector<double> grid;
            for (int i = 0; i < 25; ++i) grid.push_back(std::pow(static_cast<double>(n), i / 24.0) / n);
            std::vector<int> minority{1, n / 10, n / 4, n / 2};
            std::sort(minority.begin(), minority.end());
            minority.erase(std::unique(minority.begin(), minority.end()), minority.end());
            for (int nm : minority)
                for (double dp : grid)
                    for (double dm : grid) {
                        const BalanceSides s = balance_sides(n - nm, nm, {dp, dm});
                        ++l7;
                        l7_ok += s.lhs <= s.rhs;
                        l7_worst = std::max(l7_worst, s.lhs / s.rhs);
                        for (double mu : {0.5, 3.0, 30.0}) {
                            ModelConfig c = ModelConfig::aligned(n, n, nm, 0.0);
                            c.mu_core[0] = mu;
                            c.delta_plus = dp;
                            c.delta_minus = dm;
                            ++l4;
                            l4_ok += check_aux_inequalities(c).margin_holds;
                        }
                    }
        }
        return Outcome{l7_ok == l7 && l4_ok == l4, fmt("weight-balance inequality holds on %d/%d grid points (max lhs/rhs %.3f); margin floor on %d/%d", l7_ok, l7,
                                                       l7_worst, l4_ok, l4)};
    });

    std::printf("%s: %d criterion(s) failed\n", failures ? "FAILED" : "ALL PASSED", failures);
    return failures ? 1 : 0;
}
