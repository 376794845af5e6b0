#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "wgrisk/bounds.hpp"
#include "wgrisk/estimators.hpp"
#include "wgrisk/model.hpp"
#include "wgrisk/rng.hpp"

namespace wgrisk {

using Eigen::Matrix3d;

// ---------------------------------------------------------------------------
// Staged Gram decomposition
//
// X_0 = Q, X_1 = v_1 mubar_1^T + X_0, X_2 = v_2 mubar_2^T + X_1 = X, with
// v_1 = a, mubar_1 = mubar_s, v_2 = y, mubar_2 = mubar_c. Each stage adds a
// rank-3 term to the Gram matrix:
//   X_k X_k^T = X_{k-1} X_{k-1}^T + L_k R_k,
//   L_k = [|mubar_k| v_k, d_k, v_k],  R_k = [|mubar_k| v_k^T; v_k^T; d_k^T],  d_k = Q mubar_k.

struct Decomposition {
    VectorXd v_1;   // a
    VectorXd v_2;   // y
    VectorXd mu_bar_1;   // mubar_s; empty when built from noise statistics
    VectorXd mu_bar_2;   // mubar_c; empty when built from noise statistics
    double mu_norm_1 = 0.0;
    double mu_norm_2 = 0.0;
    VectorXd d_1;
    VectorXd d_2;
    double tau = 0.0;
    MatrixXd gram_0;    // Q Q^T
    std::array<Eigen::Matrix<double, Eigen::Dynamic, 3>, 2> L;
    std::array<Eigen::Matrix<double, 3, Eigen::Dynamic>, 2> R;

    Eigen::Index n() const noexcept { return v_1.size(); }
    const VectorXd& v(int k) const { return k == 1 ? v_1 : v_2; }
    const VectorXd& dvec(int k) const { return k == 1 ? d_1 : d_2; }
    double mu_norm(int k) const { return k == 1 ? mu_norm_1 : mu_norm_2; }

    /// X_k X_k^T for k = 0, 1, 2.
    MatrixXd gram(int k) const {
        MatrixXd g = gram_0;
        for (int j = 1; j <= k; ++j) g.noalias() += L[j - 1] * R[j - 1];
        return g;
    }
};

namespace detail {

inline void fill_factors(Decomposition& dec) {
    for (int k = 1; k <= 2; ++k) {
        auto& l = dec.L[k - 1];
        auto& r = dec.R[k - 1];
        const auto n = dec.n();
        l.resize(n, 3);
        r.resize(3, n);
        l.col(0) = dec.mu_norm(k) * dec.v(k);
        l.col(1) = dec.dvec(k);
        l.col(2) = dec.v(k);
        r.row(0) = dec.mu_norm(k) * dec.v(k).transpose();
        r.row(1) = dec.v(k).transpose();
        r.row(2) = dec.dvec(k).transpose();
    }
}

} // namespace detail

inline Decomposition build_decomposition(const Dataset& ds, double tau) {
    if (ds.Q.size() == 0 || ds.Q.rows() != ds.X.rows()) throw std::invalid_argument("build_decomposition: dataset does not retain Q");
    if (!(tau >= 0.0)) throw std::invalid_argument("build_decomposition: tau must be nonnegative");
    auto [mc, ms] = embed_means(ds.config);
    Decomposition dec;
    dec.v_1 = ds.labels.a;
    dec.v_2 = ds.labels.y;
    dec.mu_bar_1 = ms;
    dec.mu_bar_2 = mc;
    dec.mu_norm_1 = ms.norm();
    dec.mu_norm_2 = mc.norm();
    dec.d_1 = ds.Q * ms;
    dec.d_2 = ds.Q * mc;
    dec.tau = tau;
    dec.gram_0 = ds.Q * ds.Q.transpose();
    detail::fill_factors(dec);
    return dec;
}

/// Same decomposition from streamed noise statistics, with means rescaled by (core_scale, spur_scale).
inline Decomposition build_decomposition(const NoiseStats& ns, const Labels& l, double tau, double core_scale = 1.0, double spur_scale = 1.0) {
    if (!(tau >= 0.0)) throw std::invalid_argument("build_decomposition: tau must be nonnegative");
    Decomposition dec;
    dec.v_1 = l.a;
    dec.v_2 = l.y;
    dec.mu_norm_1 = std::abs(spur_scale) * std::sqrt(ns.mu_spur_sq);
    dec.mu_norm_2 = std::abs(core_scale) * std::sqrt(ns.mu_core_sq);
    dec.d_1 = spur_scale * ns.q_spur;
    dec.d_2 = core_scale * ns.q_core;
    dec.tau = tau;
    dec.gram_0 = ns.qqt;
    detail::fill_factors(dec);
    return dec;
}

// ---------------------------------------------------------------------------
// The 3x3 update system A_k = I + R_k M_{k-1}^{-1} L_k

/// Order-(k-1) primitives that determine A_k: s = s_kk, h = h_kk, t = t_kk, plus |mubar_k|.
struct StageTerms {
    double mu_norm = 0.0;
    double s = 0.0;
    double h = 0.0;
    double t = 0.0;
};

inline Matrix3d a_matrix(const StageTerms& p) {
    const double m = p.mu_norm;
    Matrix3d a;
    a << 1.0 + m * m * p.s, m * p.h, m * p.s,
         m * p.s, 1.0 + p.h, p.s,
         m * p.h, p.t, 1.0 + p.h;
    return a;
}

struct DetAdj {
    double det = 0.0;
    Matrix3d adj;
};

/// det(A_k) = s (|mubar_k|^2 - t) + (h + 1)^2 and the adjugate written out column by column.
inline DetAdj det_and_adj(const StageTerms& p) {
    const double m = p.mu_norm;
    const double s = p.s, h = p.h, t = p.t;
    DetAdj r;
    r.det = s * (m * m - t) + (h + 1.0) * (h + 1.0);
    r.adj.col(0) << (h + 1.0) * (h + 1.0) - s * t, -m * s, m * (s * t - h - h * h);
    r.adj.col(1) << m * (s * t - h - h * h), h + 1.0 + m * m * s, m * m * h * h - t * (1.0 + m * m * s);
    r.adj.col(2) << -m * s, -s, h + 1.0 + m * m * s;
    return r;
}

/// f(x_a, x_b, x_c, x_d) = [m x_a, x_b, x_a] adj(A_k) [m x_c; x_c; x_d] in closed form.
/// For p, q with x_a = p'W v_k, x_b = p'W d_k, x_c = v_k'W q, x_d = d_k'W q (W = M_{k-1}^{-1}):
///   p' M_k^{-1} q = p' W q - f / det(A_k).
inline double f_A(const StageTerms& p, double xa, double xb, double xc, double xd) {
    const double m = p.mu_norm;
    return (m * m - p.t) * xa * xc + (1.0 + p.h) * (xa * xd + xb * xc) - p.s * xb * xd;
}

class SingularUpdateError : public std::runtime_error {
public:
    SingularUpdateError(int stage, double det)
        : std::runtime_error(message(stage, det)), stage_(stage), det_(det) {}
    int stage() const noexcept { return stage_; }
    double det() const noexcept { return det_; }

private:
    static std::string message(int stage, double det) {
        std::ostringstream os;
        os << "singular rank-3 update at stage " << stage << ": det(A) = " << det;
        return os.str();
    }
    int stage_;
    double det_;
};

inline constexpr double kSingularDet = 1e-12;

struct WoodburyResult {
    std::array<MatrixXd, 3> inverse;   // M_0^{-1}, M_1^{-1}, M_2^{-1}
    std::array<Matrix3d, 2> a;         // A_1, A_2 formed explicitly
    std::array<DetAdj, 2> det_adj;     // from the closed forms
};

namespace detail {

inline Eigen::LLT<MatrixXd> factor_spd(const MatrixXd& g, double tau, const char* who) {
    MatrixXd m = g;
    m.diagonal().array() += tau;
    Eigen::LLT<MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) throw SolverError(std::string(who) + ": matrix is not positive definite", 0.0);
    return llt;
}

} // namespace detail

/// M_k^{-1} = M_{k-1}^{-1} - M_{k-1}^{-1} L_k A_k^{-1} R_k M_{k-1}^{-1} with A_k^{-1} = adj(A_k) / det(A_k).
inline WoodburyResult woodbury_invert(const Decomposition& dec) {
    WoodburyResult r;
    const auto n = dec.n();
    r.inverse[0] = detail::factor_spd(dec.gram_0, dec.tau, "woodbury_invert").solve(MatrixXd::Identity(n, n));
    for (int k = 1; k <= 2; ++k) {
        const MatrixXd& w = r.inverse[k - 1];
        const Eigen::Matrix<double, Eigen::Dynamic, 3> wl = w * dec.L[k - 1];
        const Eigen::Matrix<double, 3, Eigen::Dynamic> rw = dec.R[k - 1] * w;
        r.a[k - 1] = Matrix3d::Identity() + dec.R[k - 1] * wl;
        const VectorXd wv = w * dec.v(k);
        StageTerms st{dec.mu_norm(k), dec.v(k).dot(wv), dec.dvec(k).dot(wv), dec.dvec(k).dot(w * dec.dvec(k))};
        r.det_adj[k - 1] = det_and_adj(st);
        const double det = r.det_adj[k - 1].det;
        if (!(std::abs(det) >= kSingularDet)) throw SingularUpdateError(k, det);
        r.inverse[k] = w - wl * (r.det_adj[k - 1].adj / det) * rw;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Primitives
//
// Every primitive is a bilinear form p' M_k^{-1} q (or p' M_k^{-1} X_k X_k^T M_k^{-1} q)
// between members of the family
//   P = [v_1, v_2, d_1, d_2, u, Delta^{-1} v_1, Delta^{-1} v_2],
// so each order is summarized by two 7x7 form matrices.

namespace fam {
inline constexpr int v1 = 0, v2 = 1, d1 = 2, d2 = 3, u = 4, v1d = 5, v2d = 6;
inline constexpr int size = 7;
inline constexpr int v(int i) { return i - 1; }
inline constexpr int d(int i) { return 1 + i; }
inline constexpr int vd(int i) { return 4 + i; }
} // namespace fam

using Form = Eigen::Matrix<double, fam::size, fam::size>;

enum class PrimitiveMode { direct, recursive };

inline const char* to_string(PrimitiveMode m) { return m == PrimitiveMode::direct ? "direct" : "recursive"; }

/// Problem quantities needed to normalize primitives by their rates.
struct PrimitiveContext {
    int n = 0;
    int n_plus = 0;
    int n_minus = 0;
    int d = 0;
    double tau = 0.0;
    AdjustmentWeights delta;
    double mu_norm_1 = 0.0;
    double mu_norm_2 = 0.0;
};

struct PrimitiveSet {
    std::array<Form, 3> forms;     // P' M_k^{-1} P
    std::array<Form, 3> o_forms;   // P' M_k^{-1} X_k X_k^T M_k^{-1} P
    std::array<double, 2> det_a{}; // det(A_1), det(A_2)
    PrimitiveMode mode = PrimitiveMode::direct;
    PrimitiveContext ctx;

    // Indices i, j in {1, 2} follow v_1 = a, v_2 = y; k in {0, 1, 2}.
    double s(int i, int j, int k) const { return forms[k](fam::v(i), fam::v(j)); }
    double t(int i, int j, int k) const { return forms[k](fam::d(i), fam::d(j)); }
    double h(int i, int j, int k) const { return forms[k](fam::d(i), fam::v(j)); }
    double s_uu(int k) const { return forms[k](fam::u, fam::u); }
    double s_ui(int i, int k) const { return forms[k](fam::u, fam::v(i)); }
    double h_iu(int i, int k) const { return forms[k](fam::d(i), fam::u); }
    /// s_{i_Delta, j}
    double s_dj(int i, int j, int k) const { return forms[k](fam::vd(i), fam::v(j)); }
    /// s_{i_Delta, j_Delta}
    double s_dd(int i, int j, int k) const { return forms[k](fam::vd(i), fam::vd(j)); }
    /// h_{i, j_Delta}
    double h_jd(int i, int j, int k) const { return forms[k](fam::d(i), fam::vd(j)); }
    /// o_{i_Delta, i_Delta}
    double o(int i, int k) const { return o_forms[k](fam::vd(i), fam::vd(i)); }
    double det(int k) const { return det_a[k - 1]; }
};

namespace detail {

inline MatrixXd family(const Decomposition& dec, AdjustmentWeights delta, const VectorXd& u) {
    const VectorXd b = dec.v_1.cwiseProduct(dec.v_2);
    const VectorXd dinv = b.unaryExpr([&](double g) { return g > 0 ? 1.0 / delta.plus : 1.0 / delta.minus; });
    MatrixXd p(dec.n(), fam::size);
    p.col(fam::v1) = dec.v_1;
    p.col(fam::v2) = dec.v_2;
    p.col(fam::d1) = dec.d_1;
    p.col(fam::d2) = dec.d_2;
    p.col(fam::u) = u;
    p.col(fam::v1d) = dinv.cwiseProduct(dec.v_1);
    p.col(fam::v2d) = dinv.cwiseProduct(dec.v_2);
    return p;
}

inline Form symmetric(const Form& f) { return 0.5 * (f + f.transpose()); }

inline StageTerms stage_terms(const Form& b, const Decomposition& dec, int k) {
    const int vk = fam::v(k), dk = fam::d(k);
    return {dec.mu_norm(k), b(vk, vk), b(dk, vk), b(dk, dk)};
}

/// One recursive stage in form space. b and sq hold P'W P and P'W^2 P for W = M_{k-1}^{-1}.
inline double recurse_stage(const Decomposition& dec, int k, Form& b, Form& sq) {
    const int vk = fam::v(k), dk = fam::d(k);
    const StageTerms st = stage_terms(b, dec, k);
    const DetAdj da = det_and_adj(st);
    if (!(std::abs(da.det) >= kSingularDet)) throw SingularUpdateError(k, da.det);
    const double m = st.mu_norm;

    // alpha_p = A^{-1} R W p and sigma_p = L' W^2 p, for every family member p.
    Eigen::Matrix<double, 3, fam::size> alpha, sigma;
    for (int p = 0; p < fam::size; ++p) {
        alpha.col(p) = da.adj * Eigen::Vector3d(m * b(vk, p), b(vk, p), b(dk, p)) / da.det;
        sigma.col(p) << m * sq(vk, p), sq(dk, p), sq(vk, p);
    }
    Matrix3d lam;   // L' W^2 L
    const int idx[3] = {vk, dk, vk};
    const double scale[3] = {m, 1.0, 1.0};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) lam(r, c) = scale[r] * scale[c] * sq(idx[r], idx[c]);

    Form next;
    for (int p = 0; p < fam::size; ++p)
        for (int q = 0; q < fam::size; ++q)
            next(p, q) = b(p, q) - f_A(st, b(p, vk), b(p, dk), b(vk, q), b(dk, q)) / da.det;
    const Form sq_next = sq - sigma.transpose() * alpha - alpha.transpose() * sigma + alpha.transpose() * lam * alpha;

    b = symmetric(next);
    sq = symmetric(sq_next);
    return da.det;
}

} // namespace detail

/// All basic and adjusted primitives at orders 0, 1, 2.
///
/// direct: factor X_k X_k^T + tau I for each k (assembled from Q Q^T and the rank-3 updates).
/// recursive: factor only Q Q^T + tau I, then push the order-0 forms through the stage updates
/// using det(A_k), adj(A_k) and f_A; the o-forms follow from P'M^{-1}P - tau P'M^{-2}P.
inline PrimitiveSet compute_primitives(const Decomposition& dec, AdjustmentWeights delta, const VectorXd& u, PrimitiveMode mode) {
    if (u.size() != dec.n()) throw std::invalid_argument("compute_primitives: u has the wrong length");
    if (std::abs(u.norm() - 1.0) > 1e-12) throw std::invalid_argument("compute_primitives: u must be a unit vector");
    const MatrixXd p = detail::family(dec, delta, u);
    PrimitiveSet ps;
    ps.mode = mode;

    if (mode == PrimitiveMode::direct) {
        for (int k = 0; k <= 2; ++k) {
            const MatrixXd g = dec.gram(k);
            const MatrixXd z = detail::factor_spd(g, dec.tau, "compute_primitives").solve(p);
            ps.forms[k] = detail::symmetric(p.transpose() * z);
            ps.o_forms[k] = detail::symmetric(z.transpose() * g * z);
            if (k > 0) ps.det_a[k - 1] = det_and_adj(detail::stage_terms(ps.forms[k - 1], dec, k)).det;
        }
    } else {
        const MatrixXd z = detail::factor_spd(dec.gram_0, dec.tau, "compute_primitives").solve(p);
        Form b = detail::symmetric(p.transpose() * z);
        Form sq = detail::symmetric(z.transpose() * z);
        ps.forms[0] = b;
        ps.o_forms[0] = b - dec.tau * sq;
        for (int k = 1; k <= 2; ++k) {
            ps.det_a[k - 1] = detail::recurse_stage(dec, k, b, sq);
            ps.forms[k] = b;
            ps.o_forms[k] = b - dec.tau * sq;
        }
    }
    return ps;
}

inline VectorXd unit_vector(Eigen::Index n, Eigen::Index i = 0) {
    VectorXd u = VectorXd::Zero(n);
    u[i] = 1.0;
    return u;
}

inline PrimitiveSet compute_primitives(const Dataset& ds, double tau, AdjustmentWeights delta, const VectorXd& u, PrimitiveMode mode) {
    PrimitiveSet ps = compute_primitives(build_decomposition(ds, tau), delta, u, mode);
    const auto& c = ds.config;
    ps.ctx = {c.n(), c.n_plus, c.n_minus, c.d(), tau, delta, c.mu_spur.norm(), c.mu_core.norm()};
    return ps;
}

/// Same, attaching the rate context from the config (with the decomposition's mean norms).
inline PrimitiveSet compute_primitives(const Decomposition& dec, const ModelConfig& c, AdjustmentWeights delta, const VectorXd& u, PrimitiveMode mode) {
    PrimitiveSet ps = compute_primitives(dec, delta, u, mode);
    ps.ctx = {c.n(), c.n_plus, c.n_minus, c.d(), dec.tau, delta, dec.mu_norm_1, dec.mu_norm_2};
    return ps;
}

/// Relative gap between two primitive sets, entry by entry. Each form entry is scaled by its
/// Cauchy-Schwarz envelope sqrt(|F_pp F_qq|), the natural size of a bilinear form in a PSD matrix.
inline double max_relative_discrepancy(const PrimitiveSet& a, const PrimitiveSet& b) {
    auto gap = [](double x, double y, double scale) {
        const double diff = std::abs(x - y);
        if (diff == 0.0) return 0.0;
        const double den = std::max({std::abs(x), std::abs(y), scale});
        return den > 0.0 ? diff / den : diff;
    };
    double worst = 0.0;
    for (int k = 0; k <= 2; ++k) {
        for (int which = 0; which < 2; ++which) {
            const Form& fa = which == 0 ? a.forms[k] : a.o_forms[k];
            const Form& fb = which == 0 ? b.forms[k] : b.o_forms[k];
            for (int p = 0; p < fam::size; ++p)
                for (int q = 0; q < fam::size; ++q) {
                    const double env = std::sqrt(std::abs(fa(p, p) * fa(q, q)));
                    worst = std::max(worst, gap(fa(p, q), fb(p, q), env));
                }
        }
    }
    for (int k = 1; k <= 2; ++k) worst = std::max(worst, gap(a.det(k), b.det(k), 0.0));
    return worst;
}

/// Relative error between (w'mu_b)^2 / (2 w'w) from the fitted solution and its primitive form
///   (|mubar_2|^2 s_{2D,2} + b |mubar_1|^2 s_{2D,1} + h_{2,2D} + b h_{1,2D})^2 / (2 o_{2D,2D}),  order 2.
inline double risk_identity_check(const PrimitiveSet& ps, const DualSolution& sol, int b) {
    if (b != 1 && b != -1) throw std::invalid_argument("risk_identity_check: b must be +1 or -1");
    const double m1 = ps.ctx.mu_norm_1, m2 = ps.ctx.mu_norm_2;
    const double num = m2 * m2 * ps.s_dj(2, 2, 2) + b * m1 * m1 * ps.s_dj(2, 1, 2) + ps.h_jd(2, 2, 2) + b * ps.h_jd(1, 2, 2);
    const double via_primitives = num * num / (2.0 * ps.o(2, 2));
    const double wm = sol.w_dot(b);
    const double direct = wm * wm / (2.0 * sol.w_norm_sq);
    return std::abs(direct - via_primitives) / std::abs(direct);
}

// ---------------------------------------------------------------------------
// Inverse-Wishart concentration

struct Interval {
    double low = 0.0;
    double high = 0.0;
    bool contains(double x) const { return x >= low && x <= high; }
};

/// Band for 1 / (u' A^{-1} u), A ~ Wishart(d, I_n): [d' - sqrt(2 t d'), d' + sqrt(2 t d') + 2t], d' = d - n + 1.
/// Each side fails with probability at most e^{-t}. Adding tau to both ends gives the ridge band.
inline Interval wishart_interval(int d, int n, double t) {
    const double dp = static_cast<double>(d) - n + 1;
    if (!(t >= 0.0)) throw std::invalid_argument("wishart_interval: t must be nonnegative");
    if (!(dp > 2.0 * std::max(t, 1.0))) throw std::invalid_argument("wishart_interval: requires d - n + 1 > 2 max(t, 1)");
    const double w = std::sqrt(2.0 * t * dp);
    return {dp - w, dp + w + 2.0 * t};
}

struct WishartCoverage {
    Interval band;
    int draws = 0;
    int inside = 0;
    double fraction = 0.0;
    double nominal = 0.0;    // 1 - 2 e^{-t}
    double threshold = 0.0;  // nominal - 3 binomial sigma
    bool passed() const { return fraction >= threshold; }
};

/// Fraction of draws with 1 / (u' (Q Q^T)^{-1} u) inside the band, u = e_1.
inline WishartCoverage wishart_coverage(int d, int n, double t, int draws, std::uint64_t seed) {
    if (draws < 1) throw std::invalid_argument("wishart_coverage: draws must be positive");
    WishartCoverage w;
    w.band = wishart_interval(d, n, t);
    w.draws = draws;
    const VectorXd u = unit_vector(n);
    MatrixXd q(n, d);
    for (int r = 0; r < draws; ++r) {
        const CounterRng rng(CounterRng::derive(stream(seed, Stream::wishart).key(), static_cast<std::uint64_t>(r)));
        for (int j = 0; j < d; ++j)
            for (int i = 0; i < n; ++i) q(i, j) = rng.normal(static_cast<std::uint64_t>(i) * d + j);
        MatrixXd a = MatrixXd::Zero(n, n);
        a.selfadjointView<Eigen::Lower>().rankUpdate(q);
        const double form = u.dot(a.selfadjointView<Eigen::Lower>().llt().solve(u));
        if (w.band.contains(1.0 / form)) ++w.inside;
    }
    w.fraction = static_cast<double>(w.inside) / draws;
    w.nominal = 1.0 - 2.0 * std::exp(-t);
    w.threshold = w.nominal - 3.0 * std::sqrt(w.nominal * (1.0 - w.nominal) / draws);
    return w;
}

// ---------------------------------------------------------------------------
// Rate checks

struct BandOptions {
    double main_low = 0.5, main_high = 2.0;
    double cross_low = -2.0, cross_high = 2.0;
};

struct BoundCheckRow {
    std::string name;
    int k = 0;
    double value = 0.0;
    double normalized = 0.0;
    double band_low = 0.0;
    double band_high = 0.0;
    bool pass = false;
    bool main = false;   // ratio expected near 1 (vs. a cross term bounded in magnitude)
};

/// Each primitive divided by its predicted order of magnitude and compared against a band.
/// Main terms (expected ratio ~ 1): s_ii, s_uu, s_{iD,i}, s_{iD,iD}, o_{iD,iD}, det(A_k).
/// Cross terms (expected |ratio| = O(1)): s_12, t_ij, h_ij, s_ui, h_iu, s_{iD,j}, s_{1D,2D}, h_{i,jD}.
inline std::vector<BoundCheckRow> verify_primitive_bounds(const PrimitiveSet& ps, BandOptions band = {}) {
    const auto& c = ps.ctx;
    const double dt = c.d + c.tau;
    const double n = c.n;
    const double n_delta = adjusted_quantities(c.n_plus, c.n_minus, c.delta).n_delta;
    const double n_delta1 = c.n_plus / c.delta.plus + c.n_minus / c.delta.minus;
    const double mu[3] = {0.0, c.mu_norm_1, c.mu_norm_2};
    std::vector<BoundCheckRow> rows;
    auto add = [&](std::string name, int k, double value, double rate, bool main) {
        BoundCheckRow r;
        r.name = std::move(name);
        r.k = k;
        r.value = value;
        r.normalized = rate > 0.0 ? value / rate : (value == 0.0 ? 0.0 : std::copysign(INFINITY, value));
        r.main = main;
        r.band_low = main ? band.main_low : band.cross_low;
        r.band_high = main ? band.main_high : band.cross_high;
        // A primitive that vanishes identically (zero mean block) has nothing to check.
        r.pass = (rate == 0.0 && value == 0.0) || (r.normalized >= r.band_low && r.normalized <= r.band_high);
        rows.push_back(std::move(r));
    };
    for (int k = 0; k <= 2; ++k) {
        for (int i = 1; i <= 2; ++i) {
            const std::string si = std::to_string(i);
            add("s_" + si + si, k, ps.s(i, i, k), n / dt, true);
            add("s_" + si + "D_" + si, k, ps.s_dj(i, i, k), n_delta1 / dt, true);
            add("s_" + si + "D_" + si + "D", k, ps.s_dd(i, i, k), n_delta / dt, true);
            add("o_" + si + "D_" + si + "D", k, ps.o(i, k), n_delta * c.d / (dt * dt), true);
            add("t_" + si + si, k, ps.t(i, i, k), n * mu[i] * mu[i] / dt, false);
            add("s_u_" + si, k, ps.s_ui(i, k), std::sqrt(n) / dt, false);
            add("h_" + si + "_u", k, ps.h_iu(i, k), std::sqrt(n) * mu[i] / dt, false);
            for (int j = 1; j <= 2; ++j) {
                const std::string sj = std::to_string(j);
                add("h_" + si + sj, k, ps.h(i, j, k), n * mu[i] / dt, false);
                add("h_" + si + "_" + sj + "D", k, ps.h_jd(i, j, k), std::sqrt(n * n_delta) * mu[i] / dt, false);
                if (i != j) add("s_" + si + "D_" + sj, k, ps.s_dj(i, j, k), n_delta1 / dt, false);
            }
        }
        add("s_uu", k, ps.s_uu(k), 1.0 / dt, true);
        add("s_12", k, ps.s(1, 2, k), n / dt, false);
        add("t_12", k, ps.t(1, 2, k), n * mu[1] * mu[2] / dt, false);
        add("s_1D_2D", k, ps.s_dd(1, 2, k), n_delta / dt, false);
        if (k > 0) add("det_A", k, ps.det(k), 1.0, true);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Auxiliary inequalities

struct AuxReport {
    // 1/2 (n_+/D_+ + n_-/D_-) |mubar_c| >= C1 sqrt(n n_Delta), with C1 = sqrt(alpha) |mubar_c| / 2 when n_- = alpha n.
    double margin_lhs = 0.0;
    double margin_scale = 0.0;        // sqrt(n n_Delta)
    double margin_realized_c1 = 0.0;  // lhs / scale
    double margin_reference_c1 = 0.0; // sqrt(n_-/n) |mubar_c| / 2
    bool margin_holds = false;
    // C~ (n + n_+/D_+^2 + n_-/D_-^2) / (sqrt(C) n) <= 1/2 (n_+/D_+ + n_-/D_-)
    double balance_lhs = 0.0;
    double balance_rhs = 0.0;
    bool balance_applicable = false;
    bool balance_holds = false;
};

struct BalanceSides {
    double lhs = 0.0;
    double rhs = 0.0;
    bool applicable = false;   // 1/n <= D_- <= D_+ <= 1
};

inline BalanceSides balance_sides(int n_plus, int n_minus, AdjustmentWeights w, double c = 145.0, double c_tilde = 2.01) {
    const double n = n_plus + n_minus;
    BalanceSides s;
    s.applicable = w.minus >= 1.0 / n && w.plus <= 1.0 && w.minus <= w.plus;
    s.lhs = c_tilde * (n + n_plus / (w.plus * w.plus) + n_minus / (w.minus * w.minus)) / (std::sqrt(c) * n);
    s.rhs = 0.5 * (n_plus / w.plus + n_minus / w.minus);
    return s;
}

inline AuxReport check_aux_inequalities(const ModelConfig& config, double c = 145.0, double c_tilde = 2.01) {
    const AdjustmentWeights w = AdjustmentWeights::of(config);
    const double n = config.n();
    const double mu_c = config.mu_core.norm();
    AuxReport r;
    r.margin_lhs = 0.5 * (config.n_plus / w.plus + config.n_minus / w.minus) * mu_c;
    r.margin_scale = std::sqrt(n * adjusted_quantities(config).n_delta);
    r.margin_realized_c1 = r.margin_lhs / r.margin_scale;
    r.margin_reference_c1 = std::sqrt(config.n_minus / n) * mu_c / 2.0;
    r.margin_holds = r.margin_realized_c1 >= r.margin_reference_c1 * (1.0 - 1e-12);
    const auto l7 = balance_sides(config.n_plus, config.n_minus, w, c, c_tilde);
    r.balance_lhs = l7.lhs;
    r.balance_rhs = l7.rhs;
    r.balance_applicable = l7.applicable;
    r.balance_holds = l7.lhs <= l7.rhs;
    return r;
}

// ---------------------------------------------------------------------------
// Serialization

inline void to_json(nlohmann::json& j, const PrimitiveSet& ps) {
    j = nlohmann::json{{"mode", to_string(ps.mode)}, {"det_A", {ps.det_a[0], ps.det_a[1]}}};
    auto& orders = j["orders"];
    for (int k = 0; k <= 2; ++k) {
        nlohmann::json o;
        o["k"] = k;
        for (int i = 1; i <= 2; ++i) {
            const std::string si = std::to_string(i);
            o["o_" + si + "D_" + si + "D"] = ps.o(i, k);
            o["s_u_" + si] = ps.s_ui(i, k);
            o["h_" + si + "_u"] = ps.h_iu(i, k);
            for (int jj = 1; jj <= 2; ++jj) {
                const std::string sj = std::to_string(jj);
                o["s_" + si + sj] = ps.s(i, jj, k);
                o["t_" + si + sj] = ps.t(i, jj, k);
                o["h_" + si + sj] = ps.h(i, jj, k);
                o["s_" + si + "D_" + sj] = ps.s_dj(i, jj, k);
                o["s_" + si + "D_" + sj + "D"] = ps.s_dd(i, jj, k);
                o["h_" + si + "_" + sj + "D"] = ps.h_jd(i, jj, k);
            }
        }
        o["s_uu"] = ps.s_uu(k);
        orders.push_back(std::move(o));
    }
}

inline void to_json(nlohmann::json& j, const BoundCheckRow& r) {
    j = nlohmann::json{{"name", r.name}, {"k", r.k}, {"value", r.value}, {"normalized", r.normalized},
                       {"band_low", r.band_low}, {"band_high", r.band_high}, {"pass", r.pass}};
}

inline void to_json(nlohmann::json& j, const AuxReport& r) {
    j = nlohmann::json{{"margin_lhs", r.margin_lhs},
                       {"margin_realized_c1", r.margin_realized_c1},
                       {"margin_reference_c1", r.margin_reference_c1},
                       {"margin_holds", r.margin_holds},
                       {"balance_lhs", r.balance_lhs},
                       {"balance_rhs", r.balance_rhs},
                       {"balance_applicable", r.balance_applicable},
                       {"balance_holds", r.balance_holds}};
}

} // namespace wgrisk
