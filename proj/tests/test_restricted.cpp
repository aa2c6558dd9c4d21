#include <pathcv/restricted.hpp>

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <Eigen/Cholesky>

using namespace pathcv;

namespace {

ActiveSet first_columns(int d)
{
    std::vector<int> idx(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) idx[static_cast<std::size_t>(j)] = 2 * j + 1;
    return ActiveSet(idx);
}

} // namespace

TEST(Restricted, GaussianMatchesNormalEquations)
{
    for (int inst = 0; inst < 50; ++inst) {
        Rng rng(derive_seed(11, static_cast<std::uint64_t>(inst)));
        const int d = 1 + inst % 10;
        const Matrix X = testutil::gaussian_matrix(100, 25, rng);
        const Dataset data = testutil::make_gaussian(X, testutil::head_beta(25, {1.0, -0.5, 0.25}), 1.0, rng);
        const ActiveSet a = first_columns(d);
        const auto fit = fit_restricted(data, a, 50);

        Matrix Xa(100, d);
        for (int t = 0; t < d; ++t) Xa.col(t) = X.col(a[t]);
        const Vector oracle = (Xa.transpose() * Xa).ldlt().solve(Xa.transpose() * data.y);
        ASSERT_TRUE(fit.converged);
        for (int t = 0; t < d; ++t) EXPECT_NEAR(fit.coef(t), oracle(t), 1e-8) << "instance " << inst;
        for (int j = 0; j < 25; ++j) {
            if (!a.contains(j)) EXPECT_EQ(fit.full_coef(j), 0.0);
        }
        EXPECT_LE(fit.grad_norm, 1e-6);
    }
}

TEST(Restricted, BinomialScoreVanishes)
{
    int converged = 0;
    for (int inst = 0; inst < 50; ++inst) {
        Rng rng(derive_seed(12, static_cast<std::uint64_t>(inst)));
        const Matrix X = testutil::gaussian_matrix(200, 20, rng);
        const Dataset data = testutil::make_binomial(X, testutil::head_beta(20, {1.0, -1.0, 0.5}), rng);
        const ActiveSet a = first_columns(1 + inst % 6);
        const auto fit = fit_restricted(data, a, 50);
        if (!fit.converged) continue;
        ++converged;
        Matrix Xa(200, a.size());
        for (int t = 0; t < a.size(); ++t) Xa.col(t) = X.col(a[t]);
        const Vector eta = Xa * fit.coef;
        Vector resid(200);
        for (int i = 0; i < 200; ++i) resid(i) = data.y(i) - 1.0 / (1.0 + std::exp(-eta(i)));
        EXPECT_LE((Xa.transpose() * resid).norm() / 200.0, 1e-6);
    }
    EXPECT_GE(converged, 45);
}

TEST(Restricted, CompleteSeparationIsFlagged)
{
    Dataset data;
    data.family = GlmFamily::binomial();
    data.X.resize(20, 1);
    data.y.resize(20);
    for (int i = 0; i < 20; ++i) {
        data.y(i) = i % 2;
        data.X(i, 0) = i % 2 ? 1.0 : -1.0;
    }
    const auto fit = fit_restricted(data, ActiveSet({0}), 5);
    EXPECT_FALSE(fit.converged);
    EXPECT_GT(fit.coef(0), 5.0);
    EXPECT_TRUE(std::isfinite(fit.neg_log_lik));
}

TEST(Restricted, NullModel)
{
    Rng rng(3);
    const Matrix X = testutil::gaussian_matrix(30, 4, rng);
    for (const auto& data : {testutil::make_gaussian(X, Vector::Zero(4), 1.0, rng),
                             testutil::make_binomial(X, Vector::Zero(4), rng)}) {
        const auto fit = fit_restricted(data, ActiveSet{}, 5);
        EXPECT_TRUE(fit.converged);
        EXPECT_EQ(fit.coef.size(), 0);
        EXPECT_TRUE(fit.full_coef.isZero(0.0));
        EXPECT_DOUBLE_EQ(fit.neg_log_lik, neg_log_lik(data.family, Vector::Zero(30), data.y));
    }
}

TEST(Restricted, AddingColumnNeverRaisesLoss)
{
    for (int inst = 0; inst < 20; ++inst) {
        Rng rng(derive_seed(13, static_cast<std::uint64_t>(inst)));
        const Matrix X = testutil::gaussian_matrix(150, 10, rng);
        const Dataset g = testutil::make_gaussian(X, testutil::head_beta(10, {1.0, 0.5}), 1.0, rng);
        const Dataset b = testutil::make_binomial(X, testutil::head_beta(10, {1.0, 0.5}), rng);
        for (const Dataset* data : {&g, &b}) {
            double prev = fit_restricted(*data, ActiveSet{}, 20).neg_log_lik;
            std::vector<int> idx;
            for (int j = 0; j < 6; ++j) {
                idx.push_back(j);
                const auto fit = fit_restricted(*data, ActiveSet(idx), 20);
                ASSERT_TRUE(fit.converged);
                EXPECT_LE(fit.neg_log_lik, prev + 1e-10);
                prev = fit.neg_log_lik;
            }
        }
    }
}

TEST(Restricted, IdempotentOnRepeat)
{
    Rng rng(14);
    const Matrix X = testutil::gaussian_matrix(80, 6, rng);
    const Dataset data = testutil::make_binomial(X, testutil::head_beta(6, {1.0, 1.0}), rng);
    const auto a = fit_restricted(data, ActiveSet({0, 1, 2}), 10);
    const auto b = fit_restricted(data, ActiveSet({0, 1, 2}), 10);
    EXPECT_EQ(a.coef, b.coef);
    EXPECT_EQ(a.neg_log_lik, b.neg_log_lik);
}

TEST(Restricted, OversizeModelThrows)
{
    Rng rng(4);
    const Matrix X = testutil::gaussian_matrix(30, 6, rng);
    const Dataset data = testutil::make_gaussian(X, Vector::Zero(6), 1.0, rng);
    try {
        fit_restricted(data, ActiveSet({0, 1, 2, 3}), 3);
        FAIL() << "expected oversize error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::oversize_model);
    }
}

TEST(Restricted, SingularGaussianDesignIsFlagged)
{
    Rng rng(5);
    Matrix X = testutil::gaussian_matrix(30, 3, rng);
    X.col(2) = X.col(0) + X.col(1);
    const Dataset data = testutil::make_gaussian(X, Vector::Zero(3), 1.0, rng);
    EXPECT_FALSE(fit_restricted(data, ActiveSet({0, 1, 2}), 10).converged);
}

TEST(Restricted, Intercept)
{
    Rng rng(6);
    const Matrix X = testutil::gaussian_matrix(60, 3, rng);
    Dataset data = testutil::make_gaussian(X, testutil::head_beta(3, {1.0}), 0.5, rng);
    data.y.array() += 3.0;
    RestrictedOptions opt;
    opt.intercept = true;
    const auto fit = fit_restricted(data, ActiveSet({0}), 10, opt);
    EXPECT_NEAR(fit.intercept, 3.0, 0.3);
    EXPECT_NEAR(fit.coef(0), 1.0, 0.3);
}

TEST(Restricted, DefaultSizeCap)
{
    EXPECT_EQ(default_size_cap(500, 1000), static_cast<int>(std::floor(2.0 * std::sqrt(500.0 / std::log(1000.0)))));
    EXPECT_EQ(default_size_cap(4, 2), 2);
    EXPECT_EQ(default_size_cap(23, 1000), 3);
}
