#include <pathcv/cv.hpp>
#include <pathcv/diagnostics.hpp>

#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace pathcv;
using pathcv::testutil::soft;

namespace {

Dataset orthonormal_problem(std::uint64_t seed)
{
    Rng rng(seed);
    const Matrix X = testutil::orthonormal_design(200, 50, rng);
    return testutil::make_gaussian(X, testutil::head_beta(50, {2.0, 1.6, 1.2, 0.8, 0.4}), 1.0, rng);
}

} // namespace

TEST(CoherentRate, IdenticalPathsGiveOne)
{
    const std::vector<ActiveSet> full = {ActiveSet{}, ActiveSet({1}), ActiveSet({1, 3})};
    const auto s = coherent_rate(full, {full, full, full});
    for (double v : s.cr) EXPECT_EQ(v, 1.0);
}

TEST(CoherentRate, HalfMatch)
{
    const std::vector<ActiveSet> full = {ActiveSet{}, ActiveSet({1})};
    const std::vector<ActiveSet> other = {ActiveSet{}, ActiveSet({2})};
    const auto s = coherent_rate(full, {full, other});
    EXPECT_EQ(s.cr[0], 1.0);
    EXPECT_EQ(s.cr[1], 0.5);
}

TEST(CoherentRate, SetEqualityNotSize)
{
    const std::vector<ActiveSet> full = {ActiveSet({0, 1})};
    const auto s = coherent_rate(full, {{ActiveSet({0, 2})}, {ActiveSet({0, 1})}, {ActiveSet({0, 1})}});
    EXPECT_DOUBLE_EQ(s.cr[0], 2.0 / 3.0);
    EXPECT_EQ(s.cr[0] * 3.0, 2.0);
}

TEST(CoherentRate, LengthMismatch)
{
    const std::vector<ActiveSet> full = {ActiveSet{}, ActiveSet({1})};
    EXPECT_THROW(coherent_rate(full, {{ActiveSet{}}}), Error);
}

TEST(CoherentRate, FirstNoiseAndTail)
{
    const std::vector<ActiveSet> path = {ActiveSet{}, ActiveSet({0}), ActiveSet({0, 7}), ActiveSet({0, 1, 7})};
    EXPECT_EQ(first_noise_position(path, ActiveSet({0, 1})), 2);
    EXPECT_FALSE(first_noise_position(path, ActiveSet({0, 1, 7})));
    CoherentRateSeries s;
    s.cr = {1.0, 1.0, 0.5, 0.0};
    EXPECT_DOUBLE_EQ(*mean_cr_from(s, 2), 0.25);
    EXPECT_FALSE(mean_cr_from(s, 4));
}

TEST(Shrinkage, OracleSoftThresholdIdentity)
{
    const Dataset d = orthonormal_problem(41);
    const Vector z = d.X.transpose() * d.y / d.n();
    const auto g = lambda_grid(d, 100, 1e-3);
    std::vector<Vector> betas;
    for (int k = 0; k < g.size(); ++k) {
        Vector b(50);
        for (int j = 0; j < 50; ++j) b(j) = soft(z(j), g[k]);
        betas.push_back(b);
    }
    const auto recs = shrinkage_decomposition(d, g.values, betas);
    for (const auto& r : recs) EXPECT_LE(std::abs(r.gap), 1e-8) << "lambda=" << r.lambda;
    EXPECT_EQ(recs.back().d_alpha, 50);
}

TEST(Shrinkage, SolverPathIdentity)
{
    const Dataset d = orthonormal_problem(42);
    const auto g = lambda_grid(d, 100, 1e-3);
    const auto path = fit_path(d, PenaltySpec::lasso(), g);
    const auto recs = shrinkage_decomposition(d, path);
    ASSERT_EQ(static_cast<int>(recs.size()), g.size());
    for (const auto& r : recs) EXPECT_LE(std::abs(r.gap), 1e-6);
    EXPECT_EQ(recs[0].d_alpha, 0);
    EXPECT_EQ(recs[0].shrink_term, 0.0);
    EXPECT_EQ(recs[0].gamma_hat, recs[0].gamma_tilde);
    EXPECT_EQ(recs[0].gap, 0.0);
}

TEST(Shrinkage, CorrelatedDesignReportsNonzeroGap)
{
    Rng rng(43);
    Matrix X = testutil::gaussian_matrix(200, 50, rng);
    for (int j = 1; j < 50; ++j) X.col(j) = 0.5 * X.col(j - 1) + std::sqrt(0.75) * X.col(j);
    const Dataset d = testutil::make_gaussian(X, testutil::head_beta(50, {2.0, 1.6, 1.2, 0.8, 0.4}), 1.0, rng);
    const auto path = fit_path(d, PenaltySpec::lasso(), lambda_grid(d, 30, 1e-2));
    double worst = 0.0;
    for (const auto& r : shrinkage_decomposition(d, path)) worst = std::max(worst, std::abs(r.gap));
    EXPECT_GT(worst, 1e-6);
}

TEST(Shrinkage, RejectsWrongInputs)
{
    Rng rng(44);
    const Matrix X = testutil::gaussian_matrix(60, 5, rng);
    const Dataset b = testutil::make_binomial(X, testutil::head_beta(5, {1.0}), rng);
    EXPECT_THROW(shrinkage_decomposition(b, {0.1}, {Vector::Zero(5)}), Error);
    const Dataset g = testutil::make_gaussian(X, testutil::head_beta(5, {1.0}), 1.0, rng);
    const auto mcp_path = fit_path(g, PenaltySpec::mcp(), lambda_grid(g, 5, 0.1));
    EXPECT_THROW(shrinkage_decomposition(g, mcp_path), Error);
}

TEST(OrderStat, Preconditions)
{
    EXPECT_THROW(order_stat_probability(100, 3, 3, 10, 1), Error);
    EXPECT_THROW(order_stat_probability(100, 2, 3, 10, 1), Error);
    EXPECT_THROW(order_stat_probability(3, 3, 2, 10, 1), Error);
    EXPECT_THROW(order_stat_probability(100, 3, 2, 0, 1), Error);
}

TEST(OrderStat, LargePExceedsSmallP)
{
    const double big = order_stat_probability(10000, 3, 2, 2000, 5);
    const double small = order_stat_probability(10, 3, 2, 20000, 6);
    EXPECT_GE(big, 0.9);
    EXPECT_GE(big - small, 0.05);
}

TEST(OrderStat, DeterministicAcrossThreads)
{
    OrderStatOptions a, b;
    a.model = b.model = NoiseModel::ar1;
    a.rho = b.rho = 0.6;
    b.threads = 4;
    EXPECT_EQ(order_stat_probability(500, 3, 2, 300, 9, a), order_stat_probability(500, 3, 2, 300, 9, b));
}

TEST(OrderStat, MeanShiftsMoveTheTopOrderStatistics)
{
    // two huge shifts occupy the top two slots, so T_2 is an ordinary noise maximum
    OrderStatOptions opt;
    opt.mean_shifts.assign(1000, 0.0);
    opt.mean_shifts[0] = opt.mean_shifts[1] = 100.0;
    const double shifted = order_stat_probability(1000, 3, 2, 500, 10, opt);
    const double plain = order_stat_probability(1000, 3, 2, 500, 10);
    EXPECT_GE(shifted, 0.0);
    EXPECT_LE(shifted, 1.0);
    EXPECT_NE(shifted, plain);
}

TEST(TheoreticalLambda, RatioAndShrink)
{
    const Dataset d = orthonormal_problem(45);
    const LambdaGrid g = make_grid(theoretical_lambda(50, 0, 100, 1.0) * 50.0, 2, 0.02);
    const auto path = fit_path(d, PenaltySpec::lasso(), g);
    const auto series = theoretical_lambda_series(path, 100, 1.0);
    ASSERT_FALSE(series.empty());
    EXPECT_EQ(series[0].d_alpha, path.active_set(0).size());
    const int d1 = path.active_set(1).size();
    EXPECT_NEAR(series[1].ratio, g[1] / (std::sqrt(2.0 * std::log(50.0 - d1) / 100.0)), 1e-15);
    EXPECT_DOUBLE_EQ(series[1].shrink, g[1] * g[1] * d1);
    EXPECT_DOUBLE_EQ(theoretical_lambda(50, 0, 100, 1.0), std::sqrt(2.0 * std::log(50.0) / 100.0));
}

TEST(TheoreticalLambda, SkipsSaturatedPositions)
{
    Rng rng(46);
    const Matrix X = testutil::orthonormal_design(20, 2, rng);
    const Dataset d = testutil::make_gaussian(X, testutil::head_beta(2, {3.0, 3.0}), 0.1, rng);
    const auto path = fit_path(d, PenaltySpec::lasso(), lambda_grid(d, 10, 0.01));
    for (const auto& pt : theoretical_lambda_series(path, 10, 1.0)) EXPECT_LT(pt.d_alpha, 1);
}

TEST(UniversalThreshold, TableValues)
{
    EXPECT_NEAR(universal_threshold(300, 1000, 1.0), 0.2145, 2e-4);
    EXPECT_NEAR(universal_threshold(500, 1000, 1.0), 0.1661, 2e-4);
    EXPECT_EQ(universal_threshold(500, 1000, 0.0), 0.0);
    EXPECT_EQ(universal_threshold(4 * 300, 1000, 1.0), universal_threshold(300, 1000, 1.0) / 2.0);
    EXPECT_THROW(universal_threshold(0, 1000, 1.0), Error);
}
