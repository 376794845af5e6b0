#include <gtest/gtest.h>

#include "support.hpp"
#include "wgrisk/estimators.hpp"
#include "wgrisk/risk.hpp"

using namespace wgrisk;
using wgrisk::testing::rel_diff;
using wgrisk::testing::small_config;

namespace {

// w = (X^T X + tau I)^{-1} X^T Delta^{-1} y in the primal, for tau > 0.
VectorXd primal_ridge(const Dataset& ds, AdjustmentWeights w, double tau) {
    const MatrixXd& x = ds.X;
    MatrixXd m = x.transpose() * x;
    m.diagonal().array() += tau;
    const VectorXd t = ds.labels.delta_inv(w.plus, w.minus).cwiseProduct(ds.labels.y);
    return m.ldlt().solve(x.transpose() * t);
}

} // namespace

TEST(Estimators, SingleSampleToy) {
    Dataset ds;
    ds.config = small_config(1, 2, 0, 0, 0, 0);
    ds.config.n_plus = 1;
    ds.X = MatrixXd(1, 2);
    ds.X << 3.0, 4.0;
    ds.Q = ds.X;
    ds.labels.y = VectorXd::Ones(1);
    ds.labels.a = VectorXd::Ones(1);
    ds.labels.b = VectorXd::Ones(1);
    const DualSolution sol = fit_cmni(accumulate_gram(ds, 1), {0.5, 0.5}, ds.labels);
    const VectorXd w = ds.X.transpose() * sol.c;
    EXPECT_NEAR(w[0], 0.24, 1e-14);
    EXPECT_NEAR(w[1], 0.32, 1e-14);
}

TEST(Estimators, GramMatchesDenseForAnyBlockSize) {
    const Dataset ds = sample_dataset(small_config(15, 123, 3, 9, 4, 2));
    const MatrixXd dense = ds.X * ds.X.transpose();
    auto [mc, ms] = embed_means(ds.config);
    for (int blk : {1, 7, 64, 123, 4096}) {
        const GramStats g = accumulate_gram(ds, blk);
        EXPECT_LT(rel_diff(g.gram, dense), 1e-13) << blk;
        EXPECT_LT((g.x_mu_plus - ds.X * (mc + ms)).norm(), 1e-11);
        EXPECT_LT((g.x_mu_minus - ds.X * (mc - ms)).norm(), 1e-11);
        EXPECT_LT((g.d_1 - ds.Q * ms).norm(), 1e-11);
    }
    EXPECT_THROW(accumulate_gram(ds, 0), std::invalid_argument);
}

TEST(Estimators, StreamingAndAssembledGramAgree) {
    const ModelConfig c = small_config(20, 300, 4, 25, 9, 8);
    const GramStats direct = accumulate_gram(sample_dataset(c), 64);
    const GramStats streamed = accumulate_gram(c, 37);
    EXPECT_LT(rel_diff(streamed.gram, direct.gram), 1e-13);
    const GramStats assembled = assemble_gram(noise_stats(c, 50), sample_labels(c));
    EXPECT_LT(rel_diff(assembled.gram, direct.gram), 1e-12);
    EXPECT_LT((assembled.x_mu_minus - direct.x_mu_minus).norm() / direct.x_mu_minus.norm(), 1e-12);
}

TEST(Estimators, AssembledGramWithRescaledMeans) {
    const ModelConfig c = small_config(20, 300, 4, 25, 9, 8);
    ModelConfig scaled = c;
    scaled.mu_core *= 2.0;
    scaled.mu_spur *= 0.5;
    const GramStats oracle = accumulate_gram(sample_dataset(scaled), 64);
    const GramStats g = assemble_gram(noise_stats(c, 64), sample_labels(c), 2.0, 0.5);
    EXPECT_LT(rel_diff(g.gram, oracle.gram), 1e-12);
    EXPECT_LT((g.x_mu_plus - oracle.x_mu_plus).norm() / oracle.x_mu_plus.norm(), 1e-12);
}

TEST(Estimators, CmniInterpolatesAdjustedLabels) {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const Dataset ds = sample_dataset(small_config(30, 600, 5, 20, 10, s));
        const GramStats g = accumulate_gram(ds, 128);
        const AdjustmentWeights w{0.9, 0.2};
        const DualSolution sol = fit_cmni(g, w, ds.labels);
        EXPECT_LE(interpolation_residual(sol, g, w, ds.labels), 1e-8);
        const DualSolution r0 = fit_ridge(g, w, ds.labels, 0.0);
        EXPECT_LE((r0.c - sol.c).norm() / sol.c.norm(), 1e-10);
        EXPECT_EQ(sol.method, Method::cmni);
    }
}

TEST(Estimators, RidgeMatchesPrimalSolution) {
    const Dataset ds = sample_dataset(small_config(20, 60, 4, 5, 2, 3));
    const AdjustmentWeights w{1.0, 0.3};
    const DualSolution sol = fit_ridge(accumulate_gram(ds, 16), w, ds.labels, 2.0);
    const VectorXd w_dual = ds.X.transpose() * sol.c;
    EXPECT_LT((w_dual - primal_ridge(ds, w, 2.0)).norm() / w_dual.norm(), 1e-10);
    EXPECT_NEAR(sol.w_norm_sq, w_dual.squaredNorm(), 1e-10 * w_dual.squaredNorm());
    EXPECT_THROW(fit_ridge(accumulate_gram(ds, 16), w, ds.labels, -1.0), std::invalid_argument);
}

TEST(Estimators, UniformDeltaRescalingLeavesRiskUnchanged) {
    const ModelConfig c = small_config(25, 500, 5, 30, 10, 4);
    const Dataset ds = sample_dataset(c);
    const GramStats g = accumulate_gram(ds, 100);
    const DualSolution a = fit_cmni(g, {0.8, 0.2}, ds.labels);
    const DualSolution b = fit_cmni(g, {0.4, 0.1}, ds.labels);
    EXPECT_LT((b.c - 2.0 * a.c).norm() / b.c.norm(), 1e-12);
    for (int grp : {1, -1}) EXPECT_NEAR(group_risk(a, c, grp).risk, group_risk(b, c, grp).risk, 1e-14);
}

TEST(Estimators, SingularGramRaises) {
    Dataset ds = sample_dataset(small_config(6, 40, 1, 4, 1, 1));
    ds.X.row(1) = ds.X.row(0);
    ds.Q.row(1) = ds.Q.row(0);
    EXPECT_THROW(fit_cmni(accumulate_gram(ds, 8), {1, 1}, ds.labels), SolverError);
}

TEST(Estimators, GradientDescentReachesCmni) {
    const Dataset ds = sample_dataset(small_config(20, 400, 4, 20, 5, 1));
    const GramStats g = accumulate_gram(ds, 100);
    const AdjustmentWeights w{0.8, 0.2};
    const DualSolution gd = fit_gd(g, w, ds.labels);
    const DualSolution mni = fit_cmni(g, w, ds.labels);
    EXPECT_LE((gd.c - mni.c).norm() / mni.c.norm(), 1e-4);
    EXPECT_LE(gd.iterations, 100000);
    EXPECT_EQ(gd.method, Method::gd);
}

TEST(Estimators, GradientDescentDivergenceIsReported) {
    const Dataset ds = sample_dataset(small_config(20, 400, 4, 20, 5, 1));
    const GramStats g = accumulate_gram(ds, 100);
    const double lmax = Eigen::SelfAdjointEigenSolver<MatrixXd>(g.gram).eigenvalues().maxCoeff();
    EXPECT_THROW(fit_gd(g, {1, 1}, ds.labels, GdOptions{3.0 * 20 / lmax, 1000, 1e-10}), DivergenceError);
}

TEST(Estimators, MethodNamesAndJson) {
    for (Method m : {Method::cmni, Method::ridge, Method::gd}) EXPECT_EQ(method_from_string(to_string(m)), m);
    EXPECT_THROW(method_from_string("lasso"), std::invalid_argument);
    const Dataset ds = sample_dataset(small_config(10, 50, 2, 4, 1, 1));
    const DualSolution sol = fit_ridge(accumulate_gram(ds, 16), {1, 1}, ds.labels, 0.5);
    const DualSolution back = nlohmann::json(sol).get<DualSolution>();
    EXPECT_EQ(back.c, sol.c);
    EXPECT_EQ(back.w_dot_mu, sol.w_dot_mu);
    EXPECT_EQ(back.method, Method::ridge);
}
