#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "json.hpp"
#include "wgrisk/rng.hpp"

namespace wgrisk {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Synthetic two-group Gaussian mixture with a spurious coordinate block.
///
/// A feature vector is x = y*[mu_core; 0] + a*[0; mu_spur] + z with z ~ N(0, I_d).
/// Group b = y*a; b = +1 is the majority (spurious feature agrees with the label).
struct ModelConfig {
    int d_core = 0;
    int d_spur = 0;
    VectorXd mu_core;
    VectorXd mu_spur;
    int n_plus = 0;
    int n_minus = 0;
    double pi_plus = 0.5;
    double delta_plus = 1.0;
    double delta_minus = 1.0;
    double tau = 0.0;
    std::uint64_t seed = 0;

    int d() const noexcept { return d_core + d_spur; }
    int n() const noexcept { return n_plus + n_minus; }

    /// Adjustment weight of group b.
    double delta_of(int b) const { return b > 0 ? delta_plus : delta_minus; }

    /// Throws std::invalid_argument on the first violated invariant.
    void validate() const {
        auto fail = [](const std::string& what) { throw std::invalid_argument("ModelConfig: " + what); };
        if (d_core < 1 || d_spur < 1) fail("block dimensions must be positive");
        if (mu_core.size() != d_core) fail("mu_core length must equal d_core");
        if (mu_spur.size() != d_spur) fail("mu_spur length must equal d_spur");
        if (n_plus < 1 || n_minus < 1) fail("group counts must be positive");
        if (n_plus < n_minus) fail("n_plus must be at least n_minus");
        if (d() < n()) fail("overparameterized regime requires d >= n");
        if (!(pi_plus > 0.0 && pi_plus < 1.0)) fail("pi_plus must lie in (0,1)");
        if (mu_core.squaredNorm() < mu_spur.squaredNorm()) fail("R_minus = |mu_c|^2 - |mu_s|^2 must be nonnegative");
        const double lo = 1.0 / n();
        if (!(delta_minus >= lo && delta_minus <= delta_plus && delta_plus <= 1.0))
            fail("adjustment weights must satisfy 1/n <= delta_minus <= delta_plus <= 1");
        if (!(tau >= 0.0) || !std::isfinite(tau)) fail("tau must be a finite nonnegative real");
    }

    /// Means along the first coordinate of each block, split so that
    /// |mu_c|^2 = (1 - spur_frac) R_+ and |mu_s|^2 = spur_frac R_+.
    /// spur_frac = 1/2 gives the mu_c = mu_s = sqrt(R_+/2) e_1 layout.
    static ModelConfig aligned(int d, int n, int n_minus, double r_plus, double spur_frac = 0.5) {
        ModelConfig c;
        c.d_core = (d + 1) / 2;
        c.d_spur = d - c.d_core;
        c.n_minus = n_minus;
        c.n_plus = n - n_minus;
        c.mu_core = VectorXd::Zero(c.d_core);
        c.mu_spur = VectorXd::Zero(std::max(c.d_spur, 0));
        if (c.d_core > 0) c.mu_core[0] = std::sqrt((1.0 - spur_frac) * r_plus);
        if (c.d_spur > 0) c.mu_spur[0] = std::sqrt(spur_frac * r_plus);
        return c;
    }

    /// Sets delta_pm = n_pm / n.
    ModelConfig& importance_weights() {
        delta_plus = static_cast<double>(n_plus) / n();
        delta_minus = static_cast<double>(n_minus) / n();
        return *this;
    }
};

/// Labels of one training sample; b = y .* a.
struct Labels {
    VectorXd y;
    VectorXd a;
    VectorXd b;

    Eigen::Index n() const noexcept { return y.size(); }

    /// Diagonal of Delta^{-1} as a vector.
    VectorXd delta_inv(double delta_plus, double delta_minus) const {
        return b.unaryExpr([&](double g) { return g > 0 ? 1.0 / delta_plus : 1.0 / delta_minus; });
    }
};

struct Dataset {
    MatrixXd X;
    Labels labels;
    MatrixXd Q;
    ModelConfig config;
};

struct SignalStrengths {
    double r_plus = 0.0;
    double r_minus = 0.0;
};

struct AssumptionReport {
    double delta = 0.0;
    double c_const = 0.0;
    bool pass_a = false, pass_b = false, pass_c = false, pass_d = false;
    double slack_a = 0.0, slack_b = 0.0, slack_c = 0.0, slack_d = 0.0;

    bool all() const noexcept { return pass_a && pass_b && pass_c && pass_d; }
};

/// Block embedding of the core and spurious means into R^d.
inline std::pair<VectorXd, VectorXd> embed_means(const ModelConfig& config) {
    VectorXd c = VectorXd::Zero(config.d());
    VectorXd s = VectorXd::Zero(config.d());
    c.head(config.d_core) = config.mu_core;
    s.tail(config.d_spur) = config.mu_spur;
    return {std::move(c), std::move(s)};
}

inline VectorXd group_mean(const ModelConfig& config, int b) {
    if (b != 1 && b != -1) throw std::invalid_argument("group_mean: b must be +1 or -1");
    auto [c, s] = embed_means(config);
    return c + static_cast<double>(b) * s;
}

inline SignalStrengths signal_strengths(const ModelConfig& config) {
    const double c2 = config.mu_core.squaredNorm();
    const double s2 = config.mu_spur.squaredNorm();
    return {c2 + s2, c2 - s2};
}

inline AssumptionReport check_assumptions(const ModelConfig& config, double delta, double c_const) {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("check_assumptions: delta must lie in (0,1)");
    if (!(c_const > 0.0)) throw std::invalid_argument("check_assumptions: C must be positive");
    const double n = config.n();
    const double d = config.d();
    const double log_n = std::log(n / delta);
    AssumptionReport r;
    r.delta = delta;
    r.c_const = c_const;
    r.slack_a = n / (c_const * std::log(1.0 / delta));
    r.slack_b = config.mu_core.squaredNorm() / (c_const * n * log_n);
    const double rp = signal_strengths(config).r_plus;
    r.slack_c = rp > 0.0 ? d / (c_const * rp * n) : std::numeric_limits<double>::infinity();
    r.slack_d = d / (c_const * n * n * log_n);
    r.pass_a = r.slack_a >= 1.0;
    r.pass_b = r.slack_b >= 1.0;
    r.pass_c = r.slack_c >= 1.0;
    r.pass_d = r.slack_d >= 1.0;
    return r;
}

/// Group assignment and labels. b has exactly n_minus entries equal to -1,
/// placed by a seeded Fisher-Yates shuffle; y ~ Rademacher(pi_plus); a = y .* b.
inline Labels sample_labels(const ModelConfig& config) {
    const int n = config.n();
    Labels l;
    l.b = VectorXd::Ones(n);
    l.b.tail(config.n_minus).setConstant(-1.0);
    const CounterRng perm = stream(config.seed, Stream::groups);
    for (int i = n - 1; i > 0; --i) {
        const auto j = static_cast<int>(perm.uniform(static_cast<std::uint64_t>(i)) * (i + 1));
        std::swap(l.b[i], l.b[std::min(j, i)]);
    }
    const CounterRng lab = stream(config.seed, Stream::labels);
    l.y.resize(n);
    for (int i = 0; i < n; ++i) l.y[i] = lab.uniform(static_cast<std::uint64_t>(i)) < config.pi_plus ? 1.0 : -1.0;
    l.a = l.y.cwiseProduct(l.b);
    return l;
}

/// Fills `out` (n x (col_end - col_begin)) with columns [col_begin, col_end) of the noise matrix.
/// Entry (i, j) is normal draw number i*d + j of the noise stream.
inline void noise_block(const ModelConfig& config, int col_begin, int col_end, MatrixXd& out) {
    const int n = config.n();
    const auto d = static_cast<std::uint64_t>(config.d());
    const CounterRng rng = stream(config.seed, Stream::noise);
    out.resize(n, col_end - col_begin);
    for (int j = col_begin; j < col_end; ++j)
        for (int i = 0; i < n; ++i)
            out(i, j - col_begin) = rng.normal(static_cast<std::uint64_t>(i) * d + static_cast<std::uint64_t>(j));
}

/// Draws a full dataset. Only (n_plus, n_minus, d, pi_plus, seed) drive the randomness, so
/// configs that differ only in means, weights or tau share y, a, b and Q.
inline Dataset sample_dataset(const ModelConfig& config) {
    config.validate();
    Dataset ds;
    ds.config = config;
    ds.labels = sample_labels(config);
    noise_block(config, 0, config.d(), ds.Q);
    auto [mc, ms] = embed_means(config);
    ds.X = ds.labels.y * mc.transpose() + ds.labels.a * ms.transpose() + ds.Q;
    return ds;
}

// ---------------------------------------------------------------------------
// Serialization

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"d_core", c.d_core},
                       {"d_spur", c.d_spur},
                       {"mu_core", std::vector<double>(c.mu_core.begin(), c.mu_core.end())},
                       {"mu_spur", std::vector<double>(c.mu_spur.begin(), c.mu_spur.end())},
                       {"n_plus", c.n_plus},
                       {"n_minus", c.n_minus},
                       {"pi_plus", c.pi_plus},
                       {"delta_plus", c.delta_plus},
                       {"delta_minus", c.delta_minus},
                       {"tau", c.tau},
                       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    c.d_core = j.at("d_core").get<int>();
    c.d_spur = j.at("d_spur").get<int>();
    auto mc = j.at("mu_core").get<std::vector<double>>();
    auto ms = j.at("mu_spur").get<std::vector<double>>();
    c.mu_core = Eigen::Map<VectorXd>(mc.data(), static_cast<Eigen::Index>(mc.size()));
    c.mu_spur = Eigen::Map<VectorXd>(ms.data(), static_cast<Eigen::Index>(ms.size()));
    c.n_plus = j.at("n_plus").get<int>();
    c.n_minus = j.at("n_minus").get<int>();
    c.pi_plus = j.value("pi_plus", 0.5);
    c.delta_plus = j.value("delta_plus", 1.0);
    c.delta_minus = j.value("delta_minus", 1.0);
    c.tau = j.value("tau", 0.0);
    c.seed = j.value("seed", std::uint64_t{0});
}

namespace detail {

constexpr std::uint64_t bswap64(std::uint64_t v) noexcept {
    v = ((v & 0x00ff00ff00ff00ffULL) << 8) | ((v >> 8) & 0x00ff00ff00ff00ffULL);
    v = ((v & 0x0000ffff0000ffffULL) << 16) | ((v >> 16) & 0x0000ffff0000ffffULL);
    return (v << 32) | (v >> 32);
}

inline void write_le(std::ofstream& os, const double* p, std::size_t count) {
    static_assert(sizeof(double) == 8);
    if constexpr (std::endian::native == std::endian::little) {
        os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(count * 8));
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            auto u = bswap64(std::bit_cast<std::uint64_t>(p[i]));
            os.write(reinterpret_cast<const char*>(&u), 8);
        }
    }
}

inline void read_le(std::ifstream& is, double* p, std::size_t count) {
    is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(count * 8));
    if constexpr (std::endian::native != std::endian::little) {
        for (std::size_t i = 0; i < count; ++i)
            p[i] = std::bit_cast<double>(bswap64(std::bit_cast<std::uint64_t>(p[i])));
    }
}

} // namespace detail

/// Writes `<path>` (raw little-endian float64: X row-major, y, a, b, Q row-major)
/// and `<path>.json` (dimensions, seed, generating config, layout).
inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_dataset: cannot open " + path.string());
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> xr = ds.X, qr = ds.Q;
    detail::write_le(os, xr.data(), static_cast<std::size_t>(xr.size()));
    detail::write_le(os, ds.labels.y.data(), static_cast<std::size_t>(ds.labels.y.size()));
    detail::write_le(os, ds.labels.a.data(), static_cast<std::size_t>(ds.labels.a.size()));
    detail::write_le(os, ds.labels.b.data(), static_cast<std::size_t>(ds.labels.b.size()));
    detail::write_le(os, qr.data(), static_cast<std::size_t>(qr.size()));
    if (!os) throw std::runtime_error("save_dataset: write failed for " + path.string());

    nlohmann::json side{{"n", ds.X.rows()},
                        {"d", ds.X.cols()},
                        {"seed", ds.config.seed},
                        {"dtype", "float64-le"},
                        {"layout", {"X:row-major", "y", "a", "b", "Q:row-major"}},
                        {"config", ds.config}};
    std::ofstream js(path.string() + ".json");
    if (!js) throw std::runtime_error("save_dataset: cannot open sidecar for " + path.string());
    js << side.dump(2) << '\n';
}

inline Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream js(path.string() + ".json");
    if (!js) throw std::runtime_error("load_dataset: missing sidecar " + path.string() + ".json");
    const auto side = nlohmann::json::parse(js);
    const auto n = side.at("n").get<Eigen::Index>();
    const auto d = side.at("d").get<Eigen::Index>();
    Dataset ds;
    ds.config = side.at("config").get<ModelConfig>();
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_dataset: cannot open " + path.string());
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> xr(n, d), qr(n, d);
    ds.labels.y.resize(n);
    ds.labels.a.resize(n);
    ds.labels.b.resize(n);
    detail::read_le(is, xr.data(), static_cast<std::size_t>(xr.size()));
    detail::read_le(is, ds.labels.y.data(), static_cast<std::size_t>(n));
    detail::read_le(is, ds.labels.a.data(), static_cast<std::size_t>(n));
    detail::read_le(is, ds.labels.b.data(), static_cast<std::size_t>(n));
    detail::read_le(is, qr.data(), static_cast<std::size_t>(qr.size()));
    if (!is) throw std::runtime_error("load_dataset: truncated file " + path.string());
    ds.X = xr;
    ds.Q = qr;
    return ds;
}

} // namespace wgrisk
