#pragma once

#include <pathcv/cv.hpp>
#include <pathcv/error.hpp>
#include <pathcv/format.hpp>
#include <pathcv/glm.hpp>
#include <pathcv/parallel.hpp>
#include <pathcv/path.hpp>
#include <pathcv/rng.hpp>
#include <pathcv/splits.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace pathcv {

struct MethodSpec
{
    Method method = Method::kfold;
    int k = 10;              ///< kfold rules
    std::optional<int> n_c;  ///< cv_nv / ccv; default_nc() when empty
    std::optional<int> r;    ///< cv_nv / ccv; SimConfig::r when empty
    std::optional<int> size_cap;

    bool monte_carlo() const noexcept { return method == Method::cv_nv || method == Method::ccv; }
};

/// Construction sizes to sweep for the listed Monte-Carlo methods.
struct NcSweep
{
    std::vector<Method> methods;
    std::vector<int> n_c;
};

struct SimConfig
{
    FamilyKind family = FamilyKind::gaussian;
    int n = 500;
    int p = 1000;
    double rho = 0.0;
    std::vector<std::pair<int, double>> beta = {{0, 2.0}, {1, 1.6}, {2, 1.2}, {3, 0.8}, {4, 0.4}};
    double sigma = 1.0;
    std::vector<MethodSpec> methods;
    std::vector<PenaltySpec> penalties = {PenaltySpec::lasso()};
    int n_reps = 20;
    std::uint64_t base_seed = 1;
    int test_size = 0; ///< 0 means n
    int r = 20;
    int n_lambda = 100;
    std::optional<double> min_ratio;
    bool intercept = false;
    std::optional<NcSweep> sweep;
    int threads = 1;

    Vector beta_vector() const
    {
        Vector b = Vector::Zero(p);
        for (const auto& [j, v] : beta) b(j) = v;
        return b;
    }

    /// Indices of the nonzero true coefficients.
    ActiveSet support() const
    {
        std::vector<int> idx;
        for (const auto& [j, v] : beta)
            if (v != 0.0) idx.push_back(j);
        return ActiveSet::from_unsorted(std::move(idx));
    }

    int test_rows() const noexcept { return test_size > 0 ? test_size : n; }

    int nc_for(const MethodSpec& m) const { return m.n_c.value_or(default_nc(m.method, family, n)); }
    int r_for(const MethodSpec& m) const { return m.r.value_or(r); }

    /// 100 replications and r = 50 for every method without an explicit r.
    void apply_full_scale()
    {
        n_reps = 100;
        r = 50;
    }

    void validate() const
    {
        detail::require(n >= 4 && p >= 1, "config: need n >= 4 and p >= 1");
        detail::require(rho >= 0.0 && rho < 1.0, "config: rho must lie in [0, 1)");
        detail::require(n_reps >= 1, "config: n_reps must be at least 1");
        detail::require(r >= 1, "config: r must be at least 1");
        detail::require(n_lambda >= 2, "config: n_lambda must be at least 2");
        detail::require(sigma >= 0.0, "config: sigma must be non-negative");
        detail::require(!methods.empty(), "config: no methods");
        detail::require(!penalties.empty(), "config: no penalties");
        detail::require(threads >= 1, "config: threads must be at least 1");
        for (const auto& [j, v] : beta) detail::require(j >= 0 && j < p, "config: beta index out of range");
        for (const auto& pen : penalties) pen.validate();
        for (const auto& m : methods) {
            if (m.monte_carlo()) {
                const int nc = nc_for(m);
                detail::require(nc >= 2 && nc < n, "config: method " + method_name(m.method) + " needs 2 <= n_c < n");
                detail::require(r_for(m) >= 1, "config: method r must be at least 1");
            } else {
                detail::require(m.k >= 2 && m.k <= n, "config: kfold needs 2 <= k <= n");
            }
        }
        if (sweep) {
            for (Method m : sweep->methods) {
                detail::require(m == Method::cv_nv || m == Method::ccv, "config: sweep methods must be cv_nv or ccv");
            }
            for (int nc : sweep->n_c) detail::require(nc >= 2 && nc < n, "config: sweep n_c must satisfy 2 <= n_c < n");
        }
    }
};

struct SimData
{
    Dataset train;
    Dataset test;
};

namespace detail {

/// Rows iid N(0, Sigma) with Sigma_jk = rho^|j-k|, by the AR(1) recursion along each row.
inline Matrix ar1_rows(int n, int p, double rho, Rng& rng)
{
    Matrix X(n, p);
    const double innov = std::sqrt(1.0 - rho * rho);
    for (int i = 0; i < n; ++i) {
        double prev = rng.normal();
        X(i, 0) = prev;
        for (int j = 1; j < p; ++j) {
            prev = rho * prev + innov * rng.normal();
            X(i, j) = prev;
        }
    }
    return X;
}

inline Dataset linear_rows(int n, const Vector& beta, double rho, double sigma, Rng& rng)
{
    Dataset d;
    d.family = GlmFamily::gaussian();
    d.X = ar1_rows(n, static_cast<int>(beta.size()), rho, rng);
    d.y = d.X * beta;
    for (int i = 0; i < n; ++i) d.y(i) += sigma * rng.normal();
    return d;
}

inline Dataset logistic_rows(int n, const Vector& beta, double rho, Rng& rng)
{
    Dataset d;
    d.family = GlmFamily::binomial();
    d.X = ar1_rows(n, static_cast<int>(beta.size()), rho, rng);
    const Vector eta = d.X * beta;
    d.y.resize(n);
    for (int i = 0; i < n; ++i) d.y(i) = rng.bernoulli(d.family.mean(eta(i))) ? 1.0 : 0.0;
    return d;
}

} // namespace detail

/// Training and test sets from the linear model; the test set follows the training draws in the same stream.
inline SimData gen_linear(int n, int p, double rho, const Vector& beta, double sigma, std::uint64_t seed,
                          int test_size = 0)
{
    detail::require(beta.size() == p, "gen_linear: beta length does not match p");
    detail::require(rho >= 0.0 && rho < 1.0, "gen_linear: rho must lie in [0, 1)");
    detail::require(n >= 1 && sigma >= 0.0, "gen_linear: need n >= 1 and sigma >= 0");
    Rng rng(seed);
    SimData s;
    s.train = detail::linear_rows(n, beta, rho, sigma, rng);
    s.test = detail::linear_rows(test_size > 0 ? test_size : n, beta, rho, sigma, rng);
    return s;
}

inline SimData gen_logistic(int n, int p, double rho, const Vector& beta, std::uint64_t seed, int test_size = 0)
{
    detail::require(beta.size() == p, "gen_logistic: beta length does not match p");
    detail::require(rho >= 0.0 && rho < 1.0, "gen_logistic: rho must lie in [0, 1)");
    detail::require(n >= 1, "gen_logistic: need n >= 1");
    Rng rng(seed);
    SimData s;
    s.train = detail::logistic_rows(n, beta, rho, rng);
    s.test = detail::logistic_rows(test_size > 0 ? test_size : n, beta, rho, rng);
    return s;
}

inline SimData generate(const SimConfig& cfg, std::uint64_t seed)
{
    if (cfg.family == FamilyKind::gaussian)
        return gen_linear(cfg.n, cfg.p, cfg.rho, cfg.beta_vector(), cfg.sigma, seed, cfg.test_rows());
    return gen_logistic(cfg.n, cfg.p, cfg.rho, cfg.beta_vector(), seed, cfg.test_rows());
}

struct Metrics
{
    int fn = 0;
    int fp = 0;
    int size = 0;
    double loss = 0.0;       ///< pe (gaussian) or ce (binomial) of SelectionReport::coef()
    double loss_refit = 0.0; ///< same metric for the restricted-MLE refit
    std::optional<double> lambda;
    double runtime = 0.0;    ///< seconds
};

inline Metrics evaluate(const SelectionReport& rep, const ActiveSet& truth, const Dataset& test)
{
    Metrics m;
    for (int j : truth.indices()) m.fn += !rep.selected_active.contains(j);
    for (int j : rep.selected_active.indices()) m.fp += !truth.contains(j);
    m.size = rep.selected_active.size();
    const LossMetric metric = test.family.kind == FamilyKind::gaussian ? LossMetric::pe : LossMetric::ce;
    m.loss = prediction_loss(test.family, rep.coef(), test, metric, rep.intercept());
    m.loss_refit = prediction_loss(test.family, rep.refit.full_coef, test, metric, rep.refit.intercept);
    m.lambda = rep.selected_lambda;
    return m;
}

struct RepRecord
{
    int rep = 0;
    std::string penalty;
    std::string method;
    int n_c = 0; ///< construction size used; n minus the largest fold for kfold rules
    bool ok = false;
    std::string error;
    Metrics metrics;
};

struct AggregateRow
{
    std::string method;
    std::string penalty;
    std::string metric;
    double mean = 0.0;
    double sd = 0.0;
    int n_ok = 0;
};

struct SweepPoint
{
    std::string method;
    std::string penalty;
    int n_c = 0;
    double median_fp = 0.0;
    double neg_median_fn = 0.0; ///< plotted below the axis
    int n_ok = 0;
};

struct ExperimentResult
{
    SimConfig config;
    std::vector<RepRecord> log;       ///< rep-major, then penalty, then method
    std::vector<RepRecord> sweep_log;
    std::vector<AggregateRow> aggregate;
    std::vector<SweepPoint> sweep;
};

namespace detail {

/// Split plans are keyed by split family so kfold and kfold_1se share folds.
inline std::string split_family(const SimConfig& cfg, const MethodSpec& m, int n_c)
{
    if (!m.monte_carlo()) return "kfold/k=" + std::to_string(m.k);
    return method_name(m.method) + "/nc=" + std::to_string(n_c) + "/r=" + std::to_string(cfg.r_for(m));
}

inline RepRecord run_method(const SimConfig& cfg, const SimData& data, const SolutionPath& full,
                            const MethodSpec& m, int n_c, int rep, std::uint64_t rep_seed)
{
    RepRecord rec;
    rec.rep = rep;
    rec.penalty = penalty_name(full.penalty.kind);
    rec.method = method_name(m.method);
    CvOptions opt;
    opt.path = full.options;
    opt.threads = 1;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const std::uint64_t split_seed = derive_seed(rep_seed, fnv1a(split_family(cfg, m, n_c)));
        const Dataset& train = data.train;
        SelectionReport report;
        if (!m.monte_carlo()) {
            const SplitPlan folds = kfold_splits(train.n(), m.k, split_seed);
            rec.n_c = folds.n_c;
            report = kfold_cv(train, full, folds, m.method == Method::kfold ? Rule::min : Rule::one_se, opt);
        } else {
            rec.n_c = n_c;
            std::span<const double> ys;
            if (train.family.kind == FamilyKind::binomial) ys = {train.y.data(), static_cast<std::size_t>(train.n())};
            const SplitPlan plan = monte_carlo_splits(train.n(), n_c, cfg.r_for(m), split_seed, ys);
            if (m.method == Method::cv_nv) {
                report = cv_nv(train, full, plan, opt);
            } else {
                const int cap = m.size_cap.value_or(ccv_size_cap(train.n(), train.p(), n_c, cfg.intercept));
                report = ccv(train, full, plan, cap, opt);
            }
        }
        rec.metrics = evaluate(report, cfg.support(), data.test);
        rec.ok = true;
    } catch (const Error& e) {
        rec.error = std::string(error_code_name(e.code())) + ": " + e.what();
    }
    rec.metrics.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

inline double sample_sd(const std::vector<double>& v, double mean)
{
    if (v.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double median(std::vector<double> v)
{
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

} // namespace detail

/// Name of the prediction metric for a family: "pe" or "ce".
inline std::string loss_name(FamilyKind f) { return f == FamilyKind::gaussian ? "pe" : "ce"; }

/**
 * Mean and sample sd of every metric per (method, penalty), over successful
 * replications, in order of first appearance in the log.
 */
inline std::vector<AggregateRow> aggregate(const std::vector<RepRecord>& log, FamilyKind family)
{
    std::vector<std::pair<std::string, std::string>> keys;
    for (const auto& r : log) {
        const std::pair<std::string, std::string> key{r.method, r.penalty};
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    }
    const std::string ln = loss_name(family);
    std::vector<AggregateRow> out;
    for (const auto& [method, penalty] : keys) {
        std::vector<double> fn, fp, loss, refit, size, lambda;
        for (const auto& r : log) {
            if (r.method != method || r.penalty != penalty || !r.ok) continue;
            fn.push_back(r.metrics.fn);
            fp.push_back(r.metrics.fp);
            loss.push_back(r.metrics.loss);
            refit.push_back(r.metrics.loss_refit);
            size.push_back(r.metrics.size);
            if (r.metrics.lambda) lambda.push_back(*r.metrics.lambda);
        }
        const std::pair<std::string, const std::vector<double>*> metrics[] = {
            {"fn", &fn}, {"fp", &fp}, {ln, &loss}, {ln + "_refit", &refit}, {"size", &size}, {"lambda", &lambda}};
        for (const auto& [name, vals] : metrics) {
            AggregateRow row{method, penalty, name, 0.0, 0.0, static_cast<int>(vals->size())};
            if (!vals->empty()) {
                double s = 0.0;
                for (double x : *vals) s += x;
                row.mean = s / static_cast<double>(vals->size());
                row.sd = detail::sample_sd(*vals, row.mean);
            } else {
                row.mean = std::numeric_limits<double>::quiet_NaN();
            }
            out.push_back(row);
        }
    }
    return out;
}

inline std::vector<SweepPoint> sweep_series(const std::vector<RepRecord>& log)
{
    std::vector<std::tuple<std::string, std::string, int>> keys;
    for (const auto& r : log) {
        const auto key = std::make_tuple(r.method, r.penalty, r.n_c);
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    }
    std::vector<SweepPoint> out;
    for (const auto& [method, penalty, nc] : keys) {
        std::vector<double> fp, fn;
        for (const auto& r : log) {
            if (r.method != method || r.penalty != penalty || r.n_c != nc || !r.ok) continue;
            fp.push_back(r.metrics.fp);
            fn.push_back(r.metrics.fn);
        }
        SweepPoint pt{method, penalty, nc, 0.0, 0.0, static_cast<int>(fp.size())};
        pt.median_fp = detail::median(fp);
        pt.neg_median_fn = -detail::median(fn);
        out.push_back(pt);
    }
    return out;
}

/**
 * Replication r uses seed base_seed + r for the data; every method's splits
 * come from that seed and the method's split family. Replications run on
 * cfg.threads workers and are gathered in index order.
 */
inline ExperimentResult run_experiment(const SimConfig& cfg)
{
    cfg.validate();
    std::vector<std::vector<RepRecord>> slots(static_cast<std::size_t>(cfg.n_reps));
    std::vector<std::vector<RepRecord>> sweep_slots(static_cast<std::size_t>(cfg.n_reps));

    parallel_for(cfg.n_reps, cfg.threads, [&](int rep) {
        const std::uint64_t rep_seed = cfg.base_seed + static_cast<std::uint64_t>(rep);
        const SimData data = generate(cfg, derive_seed(rep_seed, fnv1a("data")));
        PathOptions po;
        po.intercept = cfg.intercept;
        auto& out = slots[static_cast<std::size_t>(rep)];
        auto& sout = sweep_slots[static_cast<std::size_t>(rep)];
        for (const auto& pen : cfg.penalties) {
            std::optional<SolutionPath> full;
            std::string path_error;
            try {
                const double ratio = cfg.min_ratio.value_or(default_min_ratio(cfg.n, cfg.p));
                full = fit_path(data.train, pen, lambda_grid(data.train, cfg.n_lambda, ratio, po), po);
            } catch (const Error& e) {
                path_error = std::string(error_code_name(e.code())) + ": " + e.what();
            }
            auto failed = [&](Method m, int nc) {
                RepRecord rec;
                rec.rep = rep;
                rec.penalty = penalty_name(pen.kind);
                rec.method = method_name(m);
                rec.n_c = nc;
                rec.error = path_error;
                return rec;
            };
            for (const auto& m : cfg.methods) {
                const int nc = cfg.nc_for(m);
                out.push_back(full ? detail::run_method(cfg, data, *full, m, nc, rep, rep_seed) : failed(m.method, nc));
            }
            if (!cfg.sweep) continue;
            for (Method sm : cfg.sweep->methods) {
                MethodSpec ms;
                ms.method = sm;
                for (int nc : cfg.sweep->n_c) {
                    sout.push_back(full ? detail::run_method(cfg, data, *full, ms, nc, rep, rep_seed) : failed(sm, nc));
                }
            }
        }
    });

    ExperimentResult res;
    res.config = cfg;
    for (auto& s : slots) res.log.insert(res.log.end(), s.begin(), s.end());
    for (auto& s : sweep_slots) res.sweep_log.insert(res.sweep_log.end(), s.begin(), s.end());
    res.aggregate = aggregate(res.log, cfg.family);
    if (cfg.sweep) res.sweep = sweep_series(res.sweep_log);
    return res;
}

/// Lookup helper: the aggregate row for (method, penalty, metric), if present.
inline std::optional<AggregateRow> find_row(const std::vector<AggregateRow>& rows, const std::string& method,
                                            const std::string& penalty, const std::string& metric)
{
    for (const auto& r : rows)
        if (r.method == method && r.penalty == penalty && r.metric == metric) return r;
    return std::nullopt;
}

inline std::string aggregate_csv(const std::vector<AggregateRow>& rows)
{
    std::ostringstream os;
    os << "method,penalty,metric,mean,sd,n_ok\n";
    for (const auto& r : rows) {
        os << csv_field(r.method) << ',' << csv_field(r.penalty) << ',' << csv_field(r.metric) << ','
           << format_double(r.mean) << ',' << format_double(r.sd) << ',' << r.n_ok << '\n';
    }
    return os.str();
}

/// Per-replication log; the runtime column appears only when `timing` is set.
inline std::string log_csv(const std::vector<RepRecord>& log, FamilyKind family, bool timing = false)
{
    const std::string ln = loss_name(family);
    std::ostringstream os;
    os << "rep,penalty,method,n_c,ok,fn,fp," << ln << ',' << ln << "_refit,size,lambda,error";
    if (timing) os << ",runtime";
    os << '\n';
    for (const auto& r : log) {
        const auto& m = r.metrics;
        os << r.rep << ',' << csv_field(r.penalty) << ',' << csv_field(r.method) << ',' << r.n_c << ','
           << (r.ok ? 1 : 0) << ',';
        if (r.ok) {
            os << m.fn << ',' << m.fp << ',' << format_double(m.loss) << ',' << format_double(m.loss_refit) << ','
               << m.size << ',' << (m.lambda ? format_double(*m.lambda) : "") << ',';
        } else {
            os << ",,,,,,";
        }
        os << csv_field(r.error);
        if (timing) os << ',' << format_double(m.runtime);
        os << '\n';
    }
    return os.str();
}

inline std::string sweep_csv(const std::vector<SweepPoint>& pts)
{
    std::ostringstream os;
    os << "method,penalty,n_c,median_fp,neg_median_fn,n_ok\n";
    for (const auto& p : pts) {
        os << csv_field(p.method) << ',' << csv_field(p.penalty) << ',' << p.n_c << ',' << format_double(p.median_fp)
           << ',' << format_double(p.neg_median_fn) << ',' << p.n_ok << '\n';
    }
    return os.str();
}

/// Text table in "mean(sd)" form, one line per (method, penalty).
inline std::string format_table(const ExperimentResult& res)
{
    const std::string ln = loss_name(res.config.family);
    const std::vector<std::string> cols = {"fn", "fp", ln, ln + "_refit", "size", "lambda"};
    std::vector<std::pair<std::string, std::string>> keys;
    for (const auto& r : res.aggregate) {
        const std::pair<std::string, std::string> key{r.method, r.penalty};
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    }
    auto cell = [](const std::optional<AggregateRow>& r) {
        if (!r || r->n_ok == 0) return std::string("-");
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.2f(%.2f)", r->mean, r->sd);
        return std::string(buf);
    };
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof line, "%-10s %-6s", "method", "pen");
    os << line;
    for (const auto& c : cols) {
        std::snprintf(line, sizeof line, " %14s", c.c_str());
        os << line;
    }
    os << "  fails\n";
    for (const auto& [method, penalty] : keys) {
        std::snprintf(line, sizeof line, "%-10s %-6s", method.c_str(), penalty.c_str());
        os << line;
        int n_ok = 0;
        for (const auto& c : cols) {
            const auto row = find_row(res.aggregate, method, penalty, c);
            if (c == "fn" && row) n_ok = row->n_ok;
            std::snprintf(line, sizeof line, " %14s", cell(row).c_str());
            os << line;
        }
        os << "  " << res.config.n_reps - n_ok << '\n';
    }
    return os.str();
}

} // namespace pathcv
