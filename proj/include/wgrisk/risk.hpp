#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>

#include "json.hpp"
#include "wgrisk/estimators.hpp"
#include "wgrisk/model.hpp"
#include "wgrisk/rng.hpp"

namespace wgrisk {

/// Gaussian upper tail Q(x) = P(Z > x).
inline double q_function(double x) {
    return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

inline double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Exponential sandwich for Q on x >= 0.
///
/// upper = exp(-x^2/2) (Chernoff). lower = C exp(-c x^2) with
/// C = sqrt(2e/pi) sqrt(beta-1) / (2 beta), c = beta/2, valid for every beta > 1
/// (Chang-Cosman-Milstein family); beta = 2 by default. mills_lower is
/// x phi(x) / (1 + x^2), tighter in the tail but not of exponential form.
struct QBounds {
    double upper = 1.0;
    double lower = 0.0;
    double mills_lower = 0.0;
    double lower_c = 0.0;   // C
    double lower_rate = 0.0; // c
};

inline QBounds q_bounds(double x, double beta = 2.0) {
    if (!(x >= 0.0)) throw std::invalid_argument("q_bounds: x must be nonnegative");
    if (!(beta > 1.0)) throw std::invalid_argument("q_bounds: beta must exceed 1");
    QBounds b;
    b.upper = std::exp(-0.5 * x * x);
    b.lower_c = std::sqrt(2.0 * std::numbers::e / std::numbers::pi) * std::sqrt(beta - 1.0) / (2.0 * beta);
    b.lower_rate = 0.5 * beta;
    b.lower = b.lower_c * std::exp(-b.lower_rate * x * x);
    b.mills_lower = x / (1.0 + x * x) * normal_pdf(x);
    return b;
}

struct GroupRisk {
    int group = 1;
    double margin = 0.0;    // w^T mu_b / |w|
    double exponent = 0.0;  // (w^T mu_b)^2 / (2 w^T w)
    double risk = 0.0;      // Q(margin)
    std::optional<double> mc_risk;
    std::optional<double> mc_std_err;
};

struct RiskReport {
    GroupRisk plus;
    GroupRisk minus;
    double worst_risk = 0.0;
    double avg_risk = 0.0;

    const GroupRisk& group(int b) const { return b > 0 ? plus : minus; }
};

/// Group-conditional 0-1 risk from dual statistics. Only w^T mu_b and w^T w are needed,
/// so the result is invariant under positive rescaling of w (and hence of Delta).
inline GroupRisk group_risk(const DualSolution& sol, const ModelConfig& /*config*/, int b) {
    if (b != 1 && b != -1) throw std::invalid_argument("group_risk: b must be +1 or -1");
    if (!(sol.w_norm_sq > 0.0)) throw std::domain_error("group_risk: estimator has zero norm");
    GroupRisk g;
    g.group = b;
    const double wm = sol.w_dot(b);
    g.margin = wm / std::sqrt(sol.w_norm_sq);
    g.exponent = wm * wm / (2.0 * sol.w_norm_sq);
    g.risk = q_function(g.margin);
    return g;
}

struct GroupWeights {
    double plus = 0.5;
    double minus = 0.5;

    static GroupWeights training(const ModelConfig& c) {
        return {static_cast<double>(c.n_plus) / c.n(), static_cast<double>(c.n_minus) / c.n()};
    }
};

/// (worst, average); the average is a weights-normalized mixture of the two group risks.
inline std::pair<double, double> worst_and_average(const GroupRisk& plus, const GroupRisk& minus, GroupWeights w) {
    const double total = w.plus + w.minus;
    if (!(total > 0.0) || w.plus < 0.0 || w.minus < 0.0) throw std::invalid_argument("worst_and_average: invalid weights");
    return {std::max(plus.risk, minus.risk), (w.plus * plus.risk + w.minus * minus.risk) / total};
}

inline RiskReport risk_report(const DualSolution& sol, const ModelConfig& config, std::optional<GroupWeights> w = std::nullopt) {
    RiskReport r;
    r.plus = group_risk(sol, config, 1);
    r.minus = group_risk(sol, config, -1);
    std::tie(r.worst_risk, r.avg_risk) = worst_and_average(r.plus, r.minus, w.value_or(GroupWeights::training(config)));
    return r;
}

struct McEstimate {
    double rate = 0.0;
    double std_err = 0.0;
};

/// Fresh test points of group b are x = y mu_b + z, so y w^T x = w^T mu_b + |w| g with
/// g ~ N(0,1) by symmetry of z. The estimate counts sign errors over m such draws.
inline McEstimate monte_carlo_risk(const DualSolution& sol, const ModelConfig& config, int b, long m, std::uint64_t seed) {
    if (m < 1) throw std::invalid_argument("monte_carlo_risk: m must be at least 1");
    const GroupRisk g = group_risk(sol, config, b);
    const CounterRng rng(CounterRng::derive(stream(seed, Stream::test).key(), static_cast<std::uint64_t>(b + 1)));
    long errors = 0;
    for (long i = 0; i < m; ++i)
        if (g.margin + rng.normal(static_cast<std::uint64_t>(i)) < 0.0) ++errors;
    McEstimate e;
    e.rate = static_cast<double>(errors) / static_cast<double>(m);
    e.std_err = std::sqrt(e.rate * (1.0 - e.rate) / static_cast<double>(m));
    return e;
}

inline void to_json(nlohmann::json& j, const GroupRisk& g) {
    j = nlohmann::json{{"group", g.group}, {"margin", g.margin}, {"exponent", g.exponent}, {"risk", g.risk}};
    if (g.mc_risk) {
        j["mc_risk"] = *g.mc_risk;
        j["mc_std_err"] = g.mc_std_err.value_or(0.0);
    }
}

inline void to_json(nlohmann::json& j, const RiskReport& r) {
    j = nlohmann::json{{"plus", r.plus}, {"minus", r.minus}, {"worst_risk", r.worst_risk}, {"avg_risk", r.avg_risk}};
}

} // namespace wgrisk
