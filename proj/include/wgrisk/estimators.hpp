#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include "json.hpp"
#include "wgrisk/model.hpp"

namespace wgrisk {

/// Per-group adjustment (importance) weights Delta_+ and Delta_-.
struct AdjustmentWeights {
    double plus = 1.0;
    double minus = 1.0;

    static AdjustmentWeights of(const ModelConfig& c) { return {c.delta_plus, c.delta_minus}; }
    static AdjustmentWeights identity() { return {1.0, 1.0}; }
};

/// Sufficient statistics of a sample in the dual (n-dimensional) space.
struct GramStats {
    MatrixXd gram;         // X X^T
    VectorXd x_mu_plus;    // X mu_{+1}
    VectorXd x_mu_minus;   // X mu_{-1}
    VectorXd d_1;          // Q mubar_s
    VectorXd d_2;          // Q mubar_c

    const VectorXd& x_mu(int b) const { return b > 0 ? x_mu_plus : x_mu_minus; }
};

/// Noise-only statistics: Q Q^T and the projections of Q on the two mean directions.
/// Everything in GramStats is a closed-form function of these plus the labels.
struct NoiseStats {
    MatrixXd qqt;
    VectorXd q_core;   // Q mubar_c
    VectorXd q_spur;   // Q mubar_s
    double mu_core_sq = 0.0;
    double mu_spur_sq = 0.0;
};

class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double rcond) : std::runtime_error(what), rcond_(rcond) {}
    double rcond() const noexcept { return rcond_; }

private:
    double rcond_;
};

class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void check_block(int block_cols) {
    if (block_cols < 1) throw std::invalid_argument("block_cols must be at least 1");
}

inline void symmetrize_from_lower(MatrixXd& g) {
    g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
}

} // namespace detail

/// Gram statistics of a materialized dataset, reading X in column blocks.
inline GramStats accumulate_gram(const Dataset& ds, int block_cols) {
    detail::check_block(block_cols);
    const auto n = ds.X.rows();
    const auto d = ds.X.cols();
    if (ds.Q.rows() != n || ds.Q.cols() != d || ds.labels.n() != n || ds.config.d() != d)
        throw std::invalid_argument("accumulate_gram: dimension mismatch");
    auto [mc, ms] = embed_means(ds.config);
    GramStats s;
    s.gram = MatrixXd::Zero(n, n);
    s.x_mu_plus = VectorXd::Zero(n);
    s.x_mu_minus = VectorXd::Zero(n);
    s.d_1 = VectorXd::Zero(n);
    s.d_2 = VectorXd::Zero(n);
    for (Eigen::Index j0 = 0; j0 < d; j0 += block_cols) {
        const auto w = std::min<Eigen::Index>(block_cols, d - j0);
        const auto xb = ds.X.middleCols(j0, w);
        const auto qb = ds.Q.middleCols(j0, w);
        s.gram.selfadjointView<Eigen::Lower>().rankUpdate(xb);
        s.x_mu_plus.noalias() += xb * (mc.segment(j0, w) + ms.segment(j0, w));
        s.x_mu_minus.noalias() += xb * (mc.segment(j0, w) - ms.segment(j0, w));
        s.d_1.noalias() += qb * ms.segment(j0, w);
        s.d_2.noalias() += qb * mc.segment(j0, w);
    }
    detail::symmetrize_from_lower(s.gram);
    return s;
}

/// Gram statistics generated on the fly from the sampler; X is never held in memory,
/// only one n x block_cols slab at a time. Bit-for-bit the same draws as sample_dataset.
inline GramStats accumulate_gram(const ModelConfig& config, int block_cols) {
    detail::check_block(block_cols);
    config.validate();
    const int n = config.n();
    const int d = config.d();
    const Labels l = sample_labels(config);
    auto [mc, ms] = embed_means(config);
    GramStats s;
    s.gram = MatrixXd::Zero(n, n);
    s.x_mu_plus = VectorXd::Zero(n);
    s.x_mu_minus = VectorXd::Zero(n);
    s.d_1 = VectorXd::Zero(n);
    s.d_2 = VectorXd::Zero(n);
    MatrixXd qb;
    for (int j0 = 0; j0 < d; j0 += block_cols) {
        const int w = std::min(block_cols, d - j0);
        noise_block(config, j0, j0 + w, qb);
        s.d_1.noalias() += qb * ms.segment(j0, w);
        s.d_2.noalias() += qb * mc.segment(j0, w);
        qb.noalias() += l.y * mc.segment(j0, w).transpose() + l.a * ms.segment(j0, w).transpose();
        s.gram.selfadjointView<Eigen::Lower>().rankUpdate(qb);
        s.x_mu_plus.noalias() += qb * (mc.segment(j0, w) + ms.segment(j0, w));
        s.x_mu_minus.noalias() += qb * (mc.segment(j0, w) - ms.segment(j0, w));
    }
    detail::symmetrize_from_lower(s.gram);
    return s;
}

/// Streams the noise matrix once and keeps Q Q^T plus its projections on the config's means.
inline NoiseStats noise_stats(const ModelConfig& config, int block_cols) {
    detail::check_block(block_cols);
    config.validate();
    const int n = config.n();
    const int d = config.d();
    auto [mc, ms] = embed_means(config);
    NoiseStats ns;
    ns.qqt = MatrixXd::Zero(n, n);
    ns.q_core = VectorXd::Zero(n);
    ns.q_spur = VectorXd::Zero(n);
    ns.mu_core_sq = config.mu_core.squaredNorm();
    ns.mu_spur_sq = config.mu_spur.squaredNorm();
    MatrixXd qb;
    for (int j0 = 0; j0 < d; j0 += block_cols) {
        const int w = std::min(block_cols, d - j0);
        noise_block(config, j0, j0 + w, qb);
        ns.qqt.selfadjointView<Eigen::Lower>().rankUpdate(qb);
        ns.q_core.noalias() += qb * mc.segment(j0, w);
        ns.q_spur.noalias() += qb * ms.segment(j0, w);
    }
    detail::symmetrize_from_lower(ns.qqt);
    return ns;
}

inline NoiseStats noise_stats(const Dataset& ds) {
    auto [mc, ms] = embed_means(ds.config);
    NoiseStats ns;
    ns.qqt = ds.Q * ds.Q.transpose();
    ns.q_core = ds.Q * mc;
    ns.q_spur = ds.Q * ms;
    ns.mu_core_sq = mc.squaredNorm();
    ns.mu_spur_sq = ms.squaredNorm();
    return ns;
}

/// Gram statistics for means rescaled as mu_c -> core_scale * mu_c, mu_s -> spur_scale * mu_s.
/// Uses mubar_c orthogonal to mubar_s:
///   X X^T = Q Q^T + |mubar_c|^2 y y^T + |mubar_s|^2 a a^T + y d_2^T + d_2 y^T + a d_1^T + d_1 a^T
///   X mu_b = |mubar_c|^2 y + b |mubar_s|^2 a + d_2 + b d_1
inline GramStats assemble_gram(const NoiseStats& ns, const Labels& l, double core_scale = 1.0, double spur_scale = 1.0) {
    if (ns.qqt.rows() != l.n()) throw std::invalid_argument("assemble_gram: dimension mismatch");
    const double c2 = core_scale * core_scale * ns.mu_core_sq;
    const double s2 = spur_scale * spur_scale * ns.mu_spur_sq;
    GramStats s;
    s.d_2 = core_scale * ns.q_core;
    s.d_1 = spur_scale * ns.q_spur;
    s.gram = ns.qqt;
    s.gram.noalias() += c2 * l.y * l.y.transpose() + s2 * l.a * l.a.transpose();
    s.gram.noalias() += l.y * s.d_2.transpose() + s.d_2 * l.y.transpose();
    s.gram.noalias() += l.a * s.d_1.transpose() + s.d_1 * l.a.transpose();
    s.x_mu_plus = c2 * l.y + s2 * l.a + s.d_2 + s.d_1;
    s.x_mu_minus = c2 * l.y - s2 * l.a + s.d_2 - s.d_1;
    return s;
}

// ---------------------------------------------------------------------------
// Estimators

enum class Method { cmni, ridge, gd };

inline const char* to_string(Method m) {
    switch (m) {
    case Method::cmni: return "cmni";
    case Method::ridge: return "ridge";
    case Method::gd: return "gd";
    }
    return "?";
}

inline Method method_from_string(const std::string& s) {
    if (s == "cmni") return Method::cmni;
    if (s == "ridge") return Method::ridge;
    if (s == "gd") return Method::gd;
    throw std::invalid_argument("unknown method: " + s);
}

/// Dual representation of w = X^T c.
struct DualSolution {
    VectorXd c;
    MatrixXd gram;
    double tau = 0.0;
    Method method = Method::cmni;
    double w_norm_sq = 0.0;                // c^T G c
    std::pair<double, double> w_dot_mu;    // (w^T mu_{+1}, w^T mu_{-1})
    int iterations = 0;                    // gd only

    double w_dot(int b) const { return b > 0 ? w_dot_mu.first : w_dot_mu.second; }
};

namespace detail {

inline void finish(DualSolution& sol, const GramStats& stats) {
    sol.w_norm_sq = sol.c.dot(stats.gram * sol.c);
    sol.w_dot_mu = {sol.c.dot(stats.x_mu_plus), sol.c.dot(stats.x_mu_minus)};
}

inline void check_labels(const GramStats& stats, const Labels& l) {
    if (stats.gram.rows() != l.n() || stats.gram.cols() != l.n())
        throw std::invalid_argument("estimator: Gram and label dimensions differ");
}

} // namespace detail

/// c = (G + tau I)^{-1} Delta^{-1} y via Cholesky with one refinement step.
inline DualSolution fit_ridge(const GramStats& stats, AdjustmentWeights delta, const Labels& labels, double tau) {
    if (!(tau >= 0.0)) throw std::invalid_argument("fit_ridge: tau must be nonnegative");
    detail::check_labels(stats, labels);
    const VectorXd rhs = labels.delta_inv(delta.plus, delta.minus).cwiseProduct(labels.y);
    MatrixXd m = stats.gram;
    m.diagonal().array() += tau;
    Eigen::LLT<MatrixXd> llt(m);
    const double rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
    if (llt.info() != Eigen::Success || !(rcond > 1e-14)) {
        std::ostringstream os;
        os << "fit: system matrix is numerically singular (reciprocal condition estimate " << rcond << ")";
        throw SolverError(os.str(), rcond);
    }
    DualSolution sol;
    sol.c = llt.solve(rhs);
    sol.c += llt.solve(rhs - m * sol.c);
    sol.gram = stats.gram;
    sol.tau = tau;
    sol.method = Method::ridge;
    detail::finish(sol, stats);
    return sol;
}

/// Cost-sensitive minimum-norm interpolator, c = G^{-1} Delta^{-1} y.
inline DualSolution fit_cmni(const GramStats& stats, AdjustmentWeights delta, const Labels& labels) {
    DualSolution sol = fit_ridge(stats, delta, labels, 0.0);
    sol.method = Method::cmni;
    return sol;
}

struct GdOptions {
    double step = 0.0;       // eta; 0 selects 0.9 * n / lambda_max(G)
    int iters = 100000;
    double tol = 1e-10;      // stop when |Delta^{-1}y - G c| <= tol * |Delta^{-1}y|
};

/// Full-batch gradient descent from zero on (1/n) sum (Delta^{-1} y_i - <w, x_i>)^2.
/// With w = X^T c the update w -= eta * grad is exactly c += (2 eta / n) (Delta^{-1} y - G c),
/// which stays in the row space of X and converges to the cMNI solution when eta < n / lambda_max.
inline DualSolution fit_gd(const GramStats& stats, AdjustmentWeights delta, const Labels& labels, GdOptions opt = {}) {
    detail::check_labels(stats, labels);
    if (opt.iters < 1) throw std::invalid_argument("fit_gd: iters must be at least 1");
    const auto n = static_cast<double>(labels.n());
    const VectorXd target = labels.delta_inv(delta.plus, delta.minus).cwiseProduct(labels.y);
    const double lambda_max = Eigen::SelfAdjointEigenSolver<MatrixXd>(stats.gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    const double eta = opt.step > 0.0 ? opt.step : 0.9 * n / lambda_max;
    const double gamma = 2.0 * eta / n;
    const double stop = opt.tol * target.norm();

    DualSolution sol;
    sol.c = VectorXd::Zero(labels.n());
    VectorXd r = target;
    double loss = r.squaredNorm() / n;
    int rising = 0;
    int it = 0;
    for (; it < opt.iters && r.norm() > stop; ++it) {
        sol.c.noalias() += gamma * r;
        r = target - stats.gram * sol.c;
        const double next = r.squaredNorm() / n;
        rising = (next > loss || !std::isfinite(next)) ? rising + 1 : 0;
        loss = next;
        if (rising >= 10 || !std::isfinite(loss)) {
            std::ostringstream os;
            os << "fit_gd: diverged at iteration " << it + 1 << " (loss " << loss << ", step " << eta
               << ", stable below " << n / lambda_max << ")";
            throw DivergenceError(os.str());
        }
    }
    sol.gram = stats.gram;
    sol.tau = 0.0;
    sol.method = Method::gd;
    sol.iterations = it;
    detail::finish(sol, stats);
    return sol;
}

inline DualSolution fit_gd(const Dataset& ds, AdjustmentWeights delta, GdOptions opt = {}) {
    return fit_gd(accumulate_gram(ds, 4096), delta, ds.labels, opt);
}

/// max_i | Delta_{b_i} (G c)_i - y_i |
inline double interpolation_residual(const DualSolution& sol, const GramStats& stats, AdjustmentWeights delta, const Labels& labels) {
    const VectorXd fitted = stats.gram * sol.c;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < labels.n(); ++i) {
        const double w = labels.b[i] > 0 ? delta.plus : delta.minus;
        worst = std::max(worst, std::abs(w * fitted[i] - labels.y[i]));
    }
    return worst;
}

inline void to_json(nlohmann::json& j, const DualSolution& s) {
    j = nlohmann::json{{"method", to_string(s.method)},
                       {"tau", s.tau},
                       {"c", std::vector<double>(s.c.begin(), s.c.end())},
                       {"w_norm_sq", s.w_norm_sq},
                       {"w_dot_mu_plus", s.w_dot_mu.first},
                       {"w_dot_mu_minus", s.w_dot_mu.second},
                       {"iterations", s.iterations}};
}

inline void from_json(const nlohmann::json& j, DualSolution& s) {
    s.method = method_from_string(j.at("method").get<std::string>());
    s.tau = j.at("tau").get<double>();
    auto c = j.at("c").get<std::vector<double>>();
    s.c = Eigen::Map<VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
    s.w_norm_sq = j.at("w_norm_sq").get<double>();
    s.w_dot_mu = {j.at("w_dot_mu_plus").get<double>(), j.at("w_dot_mu_minus").get<double>()};
    s.iterations = j.value("iterations", 0);
}

} // namespace wgrisk
