#include <gtest/gtest.h>

#include <set>

#include "support.hpp"
#include "wgrisk/harness.hpp"

using namespace wgrisk;
using wgrisk::testing::small_config;

namespace {

SweepSpec tiny_spec() {
    SweepSpec s;
    s.name = "tiny";
    s.base = small_config(20, 400, 4, 25, 25, 3);
    s.axis = Axis::delta_minus;
    s.values = {1.0, 0.5, 0.2};
    s.methods = {MethodSpec{Method::cmni}, MethodSpec{Method::ridge, 0.5, true}};
    s.trials = 3;
    s.block_cols = 64;
    s.threads = 2;
    return s;
}

std::size_t count_fields(const std::string& line) {
    std::size_t n = 1;
    bool quoted = false;
    for (char ch : line) {
        if (ch == '"') quoted = !quoted;
        if (ch == ',' && !quoted) ++n;
    }
    return n;
}

} // namespace

TEST(Presets, FigureOneLeft) {
    const SweepSpec s = preset("fig1_left");
    EXPECT_NEAR(std::pow(1e5, 0.6) / 4.0, 250.0, 1e-9);
    EXPECT_NEAR(signal_strengths(s.base).r_plus, 250.0, 1e-9);
    EXPECT_EQ(s.base.d(), 100000);
    EXPECT_EQ(s.base.n(), 200);
    EXPECT_EQ(s.base.n_minus, 10);
    EXPECT_DOUBLE_EQ(s.base.delta_plus, 0.95);
    ASSERT_EQ(s.values.size(), 23u);
    EXPECT_DOUBLE_EQ(s.values.front(), 0.95);
    EXPECT_DOUBLE_EQ(s.values[19], 0.05);
    for (std::size_t i = 1; i < s.values.size(); ++i) EXPECT_LT(s.values[i], s.values[i - 1]);
    EXPECT_GE(s.values.back(), 1.0 / 200);
    EXPECT_EQ(s.trials, 10);
}

TEST(Presets, FigureOneRightCoupledRule) {
    const SweepSpec s = preset("fig1_right");
    const ModelConfig c = derive_config(s, 100);
    EXPECT_EQ(c.d(), 20000);
    EXPECT_EQ(c.n_minus, 4);
    EXPECT_NEAR(signal_strengths(c).r_plus, std::pow(20000.0, 0.6) / 4.0, 1e-9);
    EXPECT_DOUBLE_EQ(c.delta_minus, 0.04);
    EXPECT_EQ(s.methods.size(), 3u);
    EXPECT_DOUBLE_EQ(s.methods[2].resolve_tau(c.d()), 20000.0);
}

TEST(Presets, FigureTwoGrid) {
    for (const char* name : {"fig2_left", "fig2_right"}) {
        const SweepSpec s = preset(name);
        EXPECT_DOUBLE_EQ(s.values.front(), 1e5 / 200);
        EXPECT_DOUBLE_EQ(s.values.back(), 1e5 * 200 / 100);
        const ModelConfig c = derive_config(s, 2e4);
        EXPECT_NEAR(std::pow(signal_strengths(c).r_plus, 2), 2e4, 1e-6);
        EXPECT_NEAR(c.mu_core[0], c.mu_spur[0], 1e-12);
    }
    EXPECT_DOUBLE_EQ(preset("fig2_left").base.delta_minus, 1.0);
    EXPECT_DOUBLE_EQ(preset("fig2_right").base.delta_minus, 0.05);
    EXPECT_THROW(preset("fig3"), std::invalid_argument);
}

TEST(Sweep, SinglePointSingleTrial) {
    SweepSpec s = tiny_spec();
    s.values = {0.5};
    s.trials = 1;
    const SweepResult r = run_sweep(s);
    ASSERT_EQ(r.rows.size(), 4u);   // 2 methods x 2 groups
    for (const auto& row : r.rows) {
        EXPECT_EQ(row.trials, 1);
        EXPECT_EQ(row.risk_std, 0.0);
        EXPECT_GE(row.risk_mean, 0.0);
        EXPECT_LE(row.risk_mean, 1.0);
    }
    EXPECT_DOUBLE_EQ(r.rows[2].tau, 200.0);
}

TEST(Sweep, MatchesDirectFitPerTrial) {
    SweepSpec s = tiny_spec();
    s.values = {0.5};
    s.trials = 2;
    s.methods = {MethodSpec{Method::cmni}};
    const SweepResult r = run_sweep(s);
    double sum = 0.0;
    for (std::uint64_t t = 0; t < 2; ++t) {
        ModelConfig c = s.base;
        c.delta_minus = 0.5;
        c.seed = trial_seed(s.base.seed, t);
        const Dataset ds = sample_dataset(c);
        sum += group_risk(fit_cmni(accumulate_gram(ds, 64), AdjustmentWeights::of(c), ds.labels), c, -1).risk;
    }
    EXPECT_NEAR(r.rows[1].risk_mean, sum / 2, 1e-12);
}

TEST(Sweep, DeterministicAcrossThreadCounts) {
    SweepSpec s = tiny_spec();
    const std::string a = to_csv(run_sweep(s).rows);
    s.threads = 1;
    EXPECT_EQ(to_csv(run_sweep(s).rows), a);
}

TEST(Sweep, InvalidPointsAreSkippedAndLogged) {
    SweepSpec s = tiny_spec();
    s.values = {0.5, 2.0, 0.001};
    const SweepResult r = run_sweep(s);
    EXPECT_EQ(r.rows.size(), 4u);
    ASSERT_EQ(r.log.size(), 2u);
    for (const auto& l : r.log) {
        EXPECT_EQ(l["event"], "skip");
        EXPECT_FALSE(l["reason"].get<std::string>().empty());
        EXPECT_EQ(nlohmann::json::parse(l.dump()), l);
    }
}

TEST(Sweep, RescaledMeansReuseNoise) {
    SweepSpec s = tiny_spec();
    s.axis = Axis::r_plus_sq;
    s.values = {100, 400};
    s.outputs = {Output::risk, Output::bounds, Output::tightness, Output::primitives};
    s.methods = {MethodSpec{Method::ridge, 1.0, false}};
    const SweepResult r = run_sweep(s);
    ModelConfig c = derive_config(s, 400);
    c.seed = trial_seed(s.base.seed, 0);
    ASSERT_EQ(r.rows.size(), 4u);
    for (const auto& row : r.rows) EXPECT_LE(row.identity_err_max, 1e-8);
    EXPECT_NEAR(r.rows[2].bound_exponent, bound_exponent(c, 1), 1e-12);
}

TEST(Sweep, RejectsBadSpec) {
    SweepSpec s = tiny_spec();
    s.trials = 0;
    EXPECT_THROW(run_sweep(s), std::invalid_argument);
    s = tiny_spec();
    s.values.clear();
    EXPECT_THROW(run_sweep(s), std::invalid_argument);
}

TEST(Emit, CsvShape) {
    const SweepResult r = run_sweep(tiny_spec());
    const std::string csv = to_csv(r.rows);
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line.rfind("run_id,axis,axis_value,method,tau,group", 0), 0u);
    const std::size_t cols = count_fields(line);
    EXPECT_EQ(cols, csv_header().size());
    int rows = 0;
    while (std::getline(is, line)) {
        EXPECT_EQ(count_fields(line), cols);
        ++rows;
    }
    EXPECT_EQ(rows, 12);
}

TEST(Emit, JsonRoundTrip) {
    const SweepResult r = run_sweep(tiny_spec());
    const nlohmann::json j = nlohmann::json::parse(render(r, Format::json, 3));
    EXPECT_EQ(j["schema_version"], kSchemaVersion);
    EXPECT_EQ(j["metadata"]["generator"], CounterRng::kName);
    EXPECT_TRUE(j["metadata"].contains("timestamp"));
    const auto rows = rows_from_json(j);
    ASSERT_EQ(rows.size(), r.rows.size());
    EXPECT_EQ(to_csv(rows), to_csv(r.rows));
}

TEST(Emit, EmptyTableIsAnError) {
    EXPECT_THROW(render(SweepResult{}, Format::csv, 0), std::runtime_error);
    EXPECT_THROW(emit(run_sweep(tiny_spec()), Format::csv, 0, "/nonexistent-dir/x.csv"), std::runtime_error);
}

TEST(Emit, SpecJsonMirror) {
    SweepSpec s = preset("fig1_right");
    s.outputs = {Output::risk, Output::primitives};
    const SweepSpec back = nlohmann::json(s).get<SweepSpec>();
    EXPECT_EQ(nlohmann::json(back), nlohmann::json(s));
    EXPECT_EQ(back.methods[1].tau_per_d, true);
}

TEST(Sweep, FigureOnePointAveragingIsNonDegenerate) {
    SweepSpec s = preset("fig1_left");
    s.values = {0.05};
    const SweepResult r = run_sweep(s);
    ASSERT_EQ(r.rows.size(), 2u);
    EXPECT_EQ(r.rows[0].trials, 10);
    EXPECT_GT(r.rows[0].worst_std, 0.0);
    EXPECT_LT(r.rows[0].worst_std, r.rows[0].worst_mean);
}

TEST(Sweep, TightnessStableAcrossScales) {
    SweepSpec s = preset("fig1_right");
    s.values = {50, 100, 200};
    s.methods = {MethodSpec{Method::cmni}};
    const SweepResult r = run_sweep(s);
    std::vector<double> ratios;
    for (const auto& row : r.rows) ratios.push_back(row.tightness_mean);
    const ConstantBand band = fit_constant_band(ratios);
    EXPECT_GT(band.lo, 0.0);
    EXPECT_LE(band.spread(), 10.0);
}
