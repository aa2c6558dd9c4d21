#include <pathcv/sim.hpp>

#include <gtest/gtest.h>

using namespace pathcv;

namespace {

double corr(const Vector& a, const Vector& b)
{
    const double ma = a.mean(), mb = b.mean();
    const double cov = ((a.array() - ma) * (b.array() - mb)).mean();
    const double va = (a.array() - ma).square().mean();
    const double vb = (b.array() - mb).square().mean();
    return cov / std::sqrt(va * vb);
}

SimConfig small_config()
{
    SimConfig cfg;
    cfg.n = 120;
    cfg.p = 40;
    cfg.n_reps = 3;
    cfg.r = 6;
    cfg.n_lambda = 30;
    cfg.methods = {{Method::kfold, 5}, {Method::kfold_1se, 5}, {Method::cv_nv}, {Method::ccv}};
    return cfg;
}

SelectionReport report_with(const ActiveSet& a, int p)
{
    SelectionReport rep;
    rep.selected_active = a;
    rep.refit.full_coef = Vector::Zero(p);
    rep.refit.active = a;
    return rep;
}

} // namespace

TEST(Generators, IndependentColumnsAtRhoZero)
{
    const auto s = gen_linear(100000, 3, 0.0, Vector::Zero(3), 1.0, 1, 10);
    EXPECT_NEAR(corr(s.train.X.col(0), s.train.X.col(1)), 0.0, 0.01);
    EXPECT_NEAR(s.train.X.col(2).squaredNorm() / 100000.0, 1.0, 0.02);
}

TEST(Generators, Ar1Correlation)
{
    const auto s = gen_linear(100000, 4, 0.5, Vector::Zero(4), 1.0, 2, 10);
    EXPECT_NEAR(corr(s.train.X.col(0), s.train.X.col(2)), 0.25, 0.01);
    EXPECT_NEAR(corr(s.train.X.col(1), s.train.X.col(2)), 0.5, 0.01);
    EXPECT_NEAR(s.train.X.col(3).squaredNorm() / 100000.0, 1.0, 0.02);
}

TEST(Generators, LinearNoiseLevel)
{
    Vector beta = Vector::Zero(3);
    beta(0) = 2.0;
    const auto s = gen_linear(100000, 3, 0.0, beta, 0.5, 3, 100);
    const Vector resid = s.train.y - s.train.X * beta;
    EXPECT_NEAR(resid.squaredNorm() / 100000.0, 0.25, 0.01);
    EXPECT_EQ(s.test.n(), 100);
}

TEST(Generators, LogisticNullRate)
{
    const auto s = gen_logistic(100000, 2, 0.0, Vector::Zero(2), 4, 10);
    EXPECT_NEAR(s.train.y.mean(), 0.5, 0.01);
}

TEST(Generators, LogisticSaturation)
{
    Vector beta = Vector::Zero(2);
    beta(0) = 1000.0;
    const auto s = gen_logistic(20000, 2, 0.0, beta, 5, 10);
    int wrong = 0;
    for (int i = 0; i < s.train.n(); ++i) wrong += (s.train.X(i, 0) > 0.0 ? 1.0 : 0.0) != s.train.y(i);
    EXPECT_LE(wrong / 20000.0, 0.01);
}

TEST(Generators, Deterministic)
{
    const auto a = gen_linear(50, 10, 0.3, Vector::Ones(10), 1.0, 9);
    const auto b = gen_linear(50, 10, 0.3, Vector::Ones(10), 1.0, 9);
    EXPECT_EQ(a.train.X, b.train.X);
    EXPECT_EQ(a.test.y, b.test.y);
    const auto c = gen_logistic(50, 10, 0.3, Vector::Ones(10), 9);
    const auto d = gen_logistic(50, 10, 0.3, Vector::Ones(10), 9);
    EXPECT_EQ(c.train.y, d.train.y);
    EXPECT_EQ(a.test.n(), 50);
}

TEST(Evaluate, SupportCounts)
{
    Rng rng(1);
    const auto s = gen_linear(20, 10, 0.0, Vector::Zero(10), 1.0, 1);
    const ActiveSet truth({0, 1, 2, 3, 4});
    auto m = evaluate(report_with(truth, 10), truth, s.test);
    EXPECT_EQ(m.fn, 0);
    EXPECT_EQ(m.fp, 0);
    m = evaluate(report_with(ActiveSet{}, 10), truth, s.test);
    EXPECT_EQ(m.fn, 5);
    EXPECT_EQ(m.fp, 0);
    m = evaluate(report_with(ActiveSet({0, 1, 2, 3, 4, 8}), 10), truth, s.test);
    EXPECT_EQ(m.fn, 0);
    EXPECT_EQ(m.fp, 1);
    EXPECT_EQ(m.size, 6);
    EXPECT_DOUBLE_EQ(m.loss, s.test.y.squaredNorm() / 20.0);
}

TEST(Experiment, SingleRepHasZeroSd)
{
    auto cfg = small_config();
    cfg.n_reps = 1;
    const auto res = run_experiment(cfg);
    for (const auto& row : res.aggregate) EXPECT_EQ(row.sd, 0.0);
    EXPECT_EQ(res.log.size(), 4u);
}

TEST(Experiment, AggregationMatchesLog)
{
    const auto cfg = small_config();
    const auto res = run_experiment(cfg);
    ASSERT_EQ(res.log.size(), 12u);
    for (const auto& row : res.aggregate) {
        std::vector<double> vals;
        for (const auto& r : res.log) {
            if (r.method != row.method || r.penalty != row.penalty || !r.ok) continue;
            const auto& m = r.metrics;
            if (row.metric == "fn") vals.push_back(m.fn);
            else if (row.metric == "fp") vals.push_back(m.fp);
            else if (row.metric == "pe") vals.push_back(m.loss);
            else if (row.metric == "pe_refit") vals.push_back(m.loss_refit);
            else if (row.metric == "size") vals.push_back(m.size);
            else if (row.metric == "lambda") vals.push_back(*m.lambda);
        }
        ASSERT_EQ(static_cast<int>(vals.size()), row.n_ok) << row.method << " " << row.metric;
        double s = 0.0;
        for (double v : vals) s += v;
        const double mean = s / vals.size();
        double ss = 0.0;
        for (double v : vals) ss += (v - mean) * (v - mean);
        EXPECT_EQ(row.mean, mean);
        EXPECT_EQ(row.sd, std::sqrt(ss / (vals.size() - 1)));
    }
}

TEST(Experiment, ByteIdenticalAcrossThreads)
{
    auto cfg = small_config();
    cfg.family = FamilyKind::binomial;
    cfg.beta = {{0, 3.0}, {1, 1.5}, {4, 2.0}};
    const auto a = run_experiment(cfg);
    cfg.threads = 3;
    const auto b = run_experiment(cfg);
    EXPECT_EQ(log_csv(a.log, cfg.family), log_csv(b.log, cfg.family));
    EXPECT_EQ(aggregate_csv(a.aggregate), aggregate_csv(b.aggregate));
    EXPECT_EQ(format_table(a), format_table(b));
    EXPECT_NE(aggregate_csv(a.aggregate).find("ce_refit"), std::string::npos);
}

TEST(Experiment, KfoldRulesShareFolds)
{
    SimConfig cfg = small_config();
    MethodSpec a{Method::kfold, 5}, b{Method::kfold_1se, 5}, c{Method::ccv, 10, 11, 6};
    EXPECT_EQ(detail::split_family(cfg, a, 0), detail::split_family(cfg, b, 0));
    EXPECT_NE(detail::split_family(cfg, a, 0), detail::split_family(cfg, c, 11));
}

TEST(Experiment, FailuresAreCountedNotFatal)
{
    auto cfg = small_config();
    MethodSpec bad{Method::ccv};
    bad.size_cap = -1;
    cfg.methods = {{Method::kfold, 5}, bad};
    const auto res = run_experiment(cfg);
    for (const auto& r : res.log) {
        if (r.method == "ccv") {
            EXPECT_FALSE(r.ok);
            EXPECT_NE(r.error.find("selection_failed"), std::string::npos);
        }
    }
    EXPECT_EQ(find_row(res.aggregate, "ccv", "lasso", "fp")->n_ok, 0);
    EXPECT_EQ(find_row(res.aggregate, "kfold", "lasso", "fp")->n_ok, 3);
    EXPECT_NE(format_table(res).find("-"), std::string::npos);
}

TEST(Experiment, NcSweepSeries)
{
    auto cfg = small_config();
    cfg.methods = {{Method::ccv}};
    cfg.sweep = NcSweep{{Method::ccv, Method::cv_nv}, {11, 30}};
    const auto res = run_experiment(cfg);
    ASSERT_EQ(res.sweep.size(), 4u);
    EXPECT_EQ(res.sweep[0].method, "ccv");
    EXPECT_EQ(res.sweep[0].n_c, 11);
    EXPECT_EQ(res.sweep[3].method, "cv_nv");
    for (const auto& pt : res.sweep) {
        EXPECT_GE(pt.median_fp, 0.0);
        EXPECT_LE(pt.neg_median_fn, 0.0);
    }
    EXPECT_EQ(sweep_csv(res.sweep).substr(0, 14), "method,penalty");
}

TEST(Experiment, FullScaleFlag)
{
    auto cfg = small_config();
    cfg.apply_full_scale();
    EXPECT_EQ(cfg.n_reps, 100);
    EXPECT_EQ(cfg.r, 50);
}

TEST(Experiment, ConfigValidation)
{
    auto cfg = small_config();
    cfg.rho = 1.0;
    EXPECT_THROW(run_experiment(cfg), Error);
    cfg = small_config();
    cfg.methods = {{Method::ccv, 10, 120}};
    EXPECT_THROW(cfg.validate(), Error);
}

TEST(Experiment, TruthFollowsNonzeroEntries)
{
    SimConfig cfg;
    cfg.beta = {{0, 3.0}, {1, 1.5}, {2, 0.0}, {3, 0.0}, {4, 2.0}};
    EXPECT_EQ(cfg.support(), ActiveSet({0, 1, 4}));
}
