#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>

#include "json.hpp"
#include "wgrisk/estimators.hpp"
#include "wgrisk/model.hpp"
#include "wgrisk/risk.hpp"

namespace wgrisk {

/// n_Delta = n_+/Delta_+^2 + n_-/Delta_-^2 and the group shares alpha_pm = (n_pm/Delta_pm^2)/n_Delta.
struct AdjustedQuantities {
    double n_delta = 0.0;
    double alpha_plus = 0.0;
    double alpha_minus = 0.0;

    double alpha(int b) const { return b > 0 ? alpha_plus : alpha_minus; }
};

inline AdjustedQuantities adjusted_quantities(int n_plus, int n_minus, AdjustmentWeights delta) {
    const double wp = n_plus / (delta.plus * delta.plus);
    const double wm = n_minus / (delta.minus * delta.minus);
    AdjustedQuantities q;
    q.n_delta = wp + wm;
    q.alpha_plus = wp / q.n_delta;
    q.alpha_minus = wm / q.n_delta;
    return q;
}

inline AdjustedQuantities adjusted_quantities(const ModelConfig& c) {
    return adjusted_quantities(c.n_plus, c.n_minus, AdjustmentWeights::of(c));
}

/// E_b = (alpha_+ R_b^2 n_+ + alpha_- R_{-b}^2 n_-) / d, where R_{+1} = R_+ and R_{-1} = R_-.
inline double bound_exponent(const ModelConfig& c, int b) {
    if (b != 1 && b != -1) throw std::invalid_argument("bound_exponent: b must be +1 or -1");
    const auto q = adjusted_quantities(c);
    const auto r = signal_strengths(c);
    const double r_b = b > 0 ? r.r_plus : r.r_minus;
    const double r_nb = b > 0 ? r.r_minus : r.r_plus;
    return (q.alpha_plus * r_b * r_b * c.n_plus + q.alpha_minus * r_nb * r_nb * c.n_minus) / c.d();
}

struct BoundConstants {
    double c1 = 1.0;
    double c2 = 1.0;
    double c3 = 1.0;
};

struct GroupBound {
    double exponent = 0.0;
    double upper = 1.0;   // exp(-C1 E_b)
    double lower = 0.0;   // C2 exp(-C3 E_b)
};

struct BoundReport {
    AdjustedQuantities adjusted;
    GroupBound plus;
    GroupBound minus;
    BoundConstants constants;

    const GroupBound& group(int b) const { return b > 0 ? plus : minus; }
};

inline BoundReport evaluate_bounds(const ModelConfig& c, BoundConstants k = {}) {
    if (!(k.c1 > 0.0 && k.c2 > 0.0 && k.c3 > 0.0)) throw std::invalid_argument("evaluate_bounds: constants must be positive");
    BoundReport r;
    r.adjusted = adjusted_quantities(c);
    r.constants = k;
    for (int b : {1, -1}) {
        GroupBound& g = b > 0 ? r.plus : r.minus;
        g.exponent = bound_exponent(c, b);
        g.upper = std::exp(-k.c1 * g.exponent);
        g.lower = k.c2 * std::exp(-k.c3 * g.exponent);
    }
    return r;
}

/// Vanishing-risk condition for R_- = 0: R_+^2 >= c * d / (alpha_b n_b).
struct ConsistencyResult {
    bool applicable = false;
    bool holds = false;
    double slack = 0.0;   // R_+^2 alpha_b n_b / d
};

inline ConsistencyResult consistency_check(const ModelConfig& c, int b, double c_const = 1.0) {
    if (b != 1 && b != -1) throw std::invalid_argument("consistency_check: b must be +1 or -1");
    ConsistencyResult res;
    const auto r = signal_strengths(c);
    if (r.r_minus != 0.0) return res;
    res.applicable = true;
    const double n_b = b > 0 ? c.n_plus : c.n_minus;
    res.slack = r.r_plus * r.r_plus * adjusted_quantities(c).alpha(b) * n_b / c.d();
    res.holds = res.slack >= c_const;
    return res;
}

/// Empirical margin exponent over the theoretical one; the matching bounds say this is Theta(1).
inline double tightness_ratio(const DualSolution& sol, const ModelConfig& c, int b) {
    const double e = bound_exponent(c, b);
    if (!(e > 0.0)) throw std::domain_error("tightness_ratio: bound exponent is zero");
    return group_risk(sol, c, b).exponent / e;
}

/// Smallest [lo, hi] containing every observed ratio; hi / lo is the spread the constants must absorb.
struct ConstantBand {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    double spread() const { return hi / lo; }
};

inline ConstantBand fit_constant_band(std::span<const double> ratios) {
    ConstantBand band;
    for (double r : ratios) {
        if (!std::isfinite(r)) continue;
        band.lo = std::min(band.lo, r);
        band.hi = std::max(band.hi, r);
    }
    return band;
}

inline void to_json(nlohmann::json& j, const GroupBound& g) {
    j = nlohmann::json{{"exponent", g.exponent}, {"upper", g.upper}, {"lower", g.lower}};
}

inline void to_json(nlohmann::json& j, const BoundReport& r) {
    j = nlohmann::json{{"n_delta", r.adjusted.n_delta},
                       {"alpha_plus", r.adjusted.alpha_plus},
                       {"alpha_minus", r.adjusted.alpha_minus},
                       {"plus", r.plus},
                       {"minus", r.minus},
                       {"constants", {r.constants.c1, r.constants.c2, r.constants.c3}}};
}

} // namespace wgrisk
