#pragma once

#include <pathcv/error.hpp>
#include <pathcv/glm.hpp>
#include <pathcv/penalty.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <vector>

namespace pathcv {

/// Solver settings shared by path fitting, lambda_max and KKT checks.
struct PathOptions
{
    double tol = 1e-7;      ///< max scaled coefficient change per sweep / outer iteration
    int max_iter = 10000;   ///< coordinate-descent sweeps per grid point
    int max_outer = 100;    ///< quadratic-approximation rounds per grid point (binomial)
    bool standardize = true;
    bool intercept = false; ///< unpenalized intercept, off by default
    bool trace = false;     ///< record the objective after every outer round
    /// Stop the path once the deviance falls below this fraction of the null
    /// deviance (1e-3 gaussian, 1e-2 binomial when negative).
    double saturation = -1.0;
};

/// Strictly decreasing, log-equispaced grid from lambda_max to lambda_max * min_ratio.
struct LambdaGrid
{
    std::vector<double> values;
    double lambda_max = 0.0;
    double min_ratio = 0.0;

    int size() const noexcept { return static_cast<int>(values.size()); }
    double operator[](int k) const { return values[static_cast<std::size_t>(k)]; }
};

inline double default_min_ratio(int n, int p) noexcept { return n > p ? 1e-3 : 5e-2; }

inline LambdaGrid make_grid(double lambda_max, int n_lambda, double min_ratio)
{
    detail::require(n_lambda >= 2, "lambda grid needs at least 2 values");
    detail::require(min_ratio > 0.0 && min_ratio < 1.0, "min_ratio must lie in (0, 1)");
    if (!(lambda_max > 0.0) || !std::isfinite(lambda_max)) {
        detail::fail(ErrorCode::degenerate_grid,
                     "lambda_max is zero: the response is uncorrelated with every column");
    }
    LambdaGrid g;
    g.lambda_max = lambda_max;
    g.min_ratio = min_ratio;
    g.values.resize(static_cast<std::size_t>(n_lambda));
    for (int k = 0; k < n_lambda; ++k) {
        const double frac = static_cast<double>(k) / static_cast<double>(n_lambda - 1);
        g.values[static_cast<std::size_t>(k)] = lambda_max * std::pow(min_ratio, frac);
    }
    return g;
}

namespace detail {

/// Design as seen by the solver: columns centered (intercept only) and scaled.
struct ScaledDesign
{
    Matrix X;
    Vector center;  // zero unless intercept
    Vector scale;   // one unless standardize
    std::vector<char> skip; // zero-variance columns, held at zero
    Vector y;
    GlmFamily family;
    bool intercept = false;

    int n() const noexcept { return static_cast<int>(X.rows()); }
    int p() const noexcept { return static_cast<int>(X.cols()); }
};

inline ScaledDesign scale_design(const Dataset& data, const PathOptions& opt)
{
    ScaledDesign d;
    d.X = data.X;
    d.y = data.y;
    d.family = data.family;
    d.intercept = opt.intercept;
    const int p = data.p();
    const double n = data.n();
    d.center = Vector::Zero(p);
    d.scale = Vector::Ones(p);
    d.skip.assign(static_cast<std::size_t>(p), 0);
    for (int j = 0; j < p; ++j) {
        auto col = d.X.col(j);
        if (opt.intercept) {
            d.center(j) = col.mean();
            col.array() -= d.center(j);
        }
        const double ms = col.squaredNorm() / n;
        if (ms <= 1e-24) {
            d.skip[static_cast<std::size_t>(j)] = 1;
            col.setZero();
            continue;
        }
        if (opt.standardize) {
            d.scale(j) = std::sqrt(ms);
            col /= d.scale(j);
        }
    }
    return d;
}

/// Mean of the null (all-zero-slope) fit.
inline double null_mean(const ScaledDesign& d)
{
    if (d.intercept) return d.y.mean();
    return d.family.mean(0.0);
}

inline double null_intercept(const ScaledDesign& d)
{
    if (!d.intercept) return 0.0;
    const double m = d.y.mean();
    if (d.family.kind == FamilyKind::gaussian) return m;
    const double c = std::clamp(m, 1e-10, 1.0 - 1e-10);
    return std::log(c / (1.0 - c));
}

inline double lambda_max(const ScaledDesign& d)
{
    const Vector resid = (d.y.array() - null_mean(d)).matrix();
    const Vector g = d.X.transpose() * resid / static_cast<double>(d.n());
    return g.cwiseAbs().maxCoeff();
}

inline double penalized_objective(const ScaledDesign& d, const PenaltySpec& pen, double lambda,
                                  const Vector& b, const Vector& eta)
{
    double obj = neg_log_lik(d.family, eta, d.y);
    for (int j = 0; j < d.p(); ++j) {
        if (b(j) != 0.0) obj += penalty_value(pen, lambda, std::abs(b(j)));
    }
    return obj;
}

/**
 * Coordinate descent on (1/2n) sum_i w_i (r_i)^2 + sum_j rho(|b_j|), where r
 * is the working residual. Updates b, intercept and r in place. Returns the
 * number of sweeps; `converged` is false when max_sweeps ran out.
 */
template <bool Weighted>
int weighted_cd(const ScaledDesign& d, const PenaltySpec& pen, double lambda, const Vector& w,
                Vector& r, Vector& b, double& a0, double tol, int max_sweeps, bool& converged)
{
    const int n = d.n();
    const int p = d.p();
    const double inv_n = 1.0 / static_cast<double>(n);
    Vector v(p);
    for (int j = 0; j < p; ++j) {
        if constexpr (Weighted)
            v(j) = (d.X.col(j).array().square() * w.array()).sum() * inv_n;
        else
            v(j) = d.X.col(j).squaredNorm() * inv_n;
    }
    const double wsum = Weighted ? w.sum() : static_cast<double>(n);

    auto update = [&](int j) -> double {
        if (d.skip[static_cast<std::size_t>(j)] || v(j) <= 0.0) return 0.0;
        const auto xj = d.X.col(j);
        double grad;
        if constexpr (Weighted)
            grad = (xj.array() * w.array() * r.array()).sum() * inv_n;
        else
            grad = xj.dot(r) * inv_n;
        const double old = b(j);
        const double nb = penalized_univariate_min(pen, lambda, v(j), grad + v(j) * old);
        if (nb == old) return 0.0;
        const double delta = nb - old;
        b(j) = nb;
        r.noalias() -= delta * xj;
        return std::abs(delta) * std::sqrt(v(j));
    };
    auto update_intercept = [&]() -> double {
        if (!d.intercept) return 0.0;
        double s;
        if constexpr (Weighted)
            s = (w.array() * r.array()).sum() / wsum;
        else
            s = r.sum() / wsum;
        a0 += s;
        r.array() -= s;
        return std::abs(s);
    };

    int sweeps = 0;
    converged = false;
    std::vector<int> active;
    while (sweeps < max_sweeps) {
        double change = update_intercept();
        for (int j = 0; j < p; ++j) change = std::max(change, update(j));
        ++sweeps;
        if (change < tol) {
            converged = true;
            break;
        }
        active.clear();
        for (int j = 0; j < p; ++j)
            if (b(j) != 0.0) active.push_back(j);
        while (sweeps < max_sweeps) {
            double c = update_intercept();
            for (int j : active) c = std::max(c, update(j));
            ++sweeps;
            if (c < tol) break;
        }
    }
    return sweeps;
}

} // namespace detail

/// Lambda grid whose first value is the smallest lambda with an all-zero solution.
inline LambdaGrid lambda_grid(const Dataset& data, int n_lambda, double min_ratio, const PathOptions& opt = {})
{
    data.validate();
    const auto d = detail::scale_design(data, opt);
    return make_grid(detail::lambda_max(d), n_lambda, min_ratio);
}

struct SolutionPath
{
    LambdaGrid grid;
    PenaltySpec penalty;
    GlmFamily family;
    PathOptions options;
    int p = 0;
    std::vector<SparseCoef> betas; ///< original-scale coefficients per grid point
    std::vector<int> n_iter;
    std::vector<char> converged;
    std::vector<std::vector<double>> objective_trace; ///< filled when options.trace
    bool saturated = false; ///< path stopped early; betas.size() < grid.size()

    int size() const noexcept { return static_cast<int>(betas.size()); }
    const ActiveSet& active_set(int k) const { return betas[static_cast<std::size_t>(k)].support; }
    Vector dense(int k) const { return betas[static_cast<std::size_t>(k)].dense(); }
    double intercept(int k) const { return betas[static_cast<std::size_t>(k)].intercept; }

    std::vector<ActiveSet> active_sets() const
    {
        std::vector<ActiveSet> out;
        out.reserve(betas.size());
        for (const auto& b : betas) out.push_back(b.support);
        return out;
    }
};

/**
 * Penalized path over `grid` by cyclic coordinate descent with warm starts.
 *
 * Gaussian fits run coordinate descent on the residual directly. Binomial
 * fits wrap it in a quadratic-approximation loop using IRLS weights; a round
 * that raises the penalized objective is backtracked, and if that fails it is
 * replaced by a majorization step with the uniform curvature bound 1/4, which
 * cannot increase the objective. Points that exhaust max_iter / max_outer are
 * kept with converged = 0. The path ends early (saturated = true) once the
 * fit explains nearly all of the null deviance.
 */
inline SolutionPath fit_path(const Dataset& data, const PenaltySpec& penalty, const LambdaGrid& grid,
                             const PathOptions& opt = {})
{
    data.validate();
    penalty.validate();
    detail::require(grid.size() >= 1, "fit_path: empty grid");
    detail::require(opt.tol > 0.0, "fit_path: tol must be positive");

    const auto d = detail::scale_design(data, opt);
    const int n = d.n();
    const int p = d.p();

    SolutionPath path;
    path.grid = grid;
    path.penalty = penalty;
    path.family = data.family;
    path.options = opt;
    path.p = p;

    Vector b = Vector::Zero(p);
    double a0 = detail::null_intercept(d);
    const bool gaussian = d.family.kind == FamilyKind::gaussian;

    Vector r(n), w(n), eta(n), mu(n);
    const Vector ones = Vector::Ones(n);

    // deviance ratio bookkeeping: nll of the saturated and the null model
    double nll_sat = 0.0;
    if (gaussian) nll_sat = -0.5 * d.y.squaredNorm() / n;
    Vector eta0 = Vector::Constant(n, a0);
    const double nll_null = neg_log_lik(d.family, eta0, d.y);
    const double sat_ratio = opt.saturation >= 0.0 ? opt.saturation : (gaussian ? 1e-3 : 1e-2);
    // at or above lambda_max the null fit is exact; skip the solve so rounding
    // in the scaled norms cannot admit a spurious coordinate
    const double lmax = detail::lambda_max(d);

    for (int k = 0; k < grid.size(); ++k) {
        const double lambda = grid[k];
        int sweeps = 0;
        bool ok = false;
        std::vector<double> trace;

        if (lambda >= lmax && b.isZero(0.0)) {
            ok = true;
        } else if (gaussian) {
            r = d.y - d.X * b;
            r.array() -= a0;
            sweeps = detail::weighted_cd<false>(d, penalty, lambda, ones, r, b, a0, opt.tol, opt.max_iter, ok);
            if (opt.trace) {
                eta = d.y - r;
                trace.push_back(detail::penalized_objective(d, penalty, lambda, b, eta));
            }
        } else {
            eta = d.X * b;
            eta.array() += a0;
            double obj = detail::penalized_objective(d, penalty, lambda, b, eta);
            if (opt.trace) trace.push_back(obj);
            bool outer_ok = false;
            bool inner_ok = true;
            for (int outer = 0; outer < opt.max_outer && sweeps < opt.max_iter; ++outer) {
                for (int i = 0; i < n; ++i) mu(i) = d.family.mean(eta(i));
                const Vector b_prev = b;
                const double a_prev = a0;

                for (int i = 0; i < n; ++i) {
                    w(i) = std::max(mu(i) * (1.0 - mu(i)), 1e-5);
                    r(i) = (d.y(i) - mu(i)) / w(i);
                }
                bool cd_ok = false;
                sweeps += detail::weighted_cd<true>(d, penalty, lambda, w, r, b, a0, opt.tol,
                                                    opt.max_iter - sweeps, cd_ok);
                eta = d.X * b;
                eta.array() += a0;
                double obj_new = detail::penalized_objective(d, penalty, lambda, b, eta);
                const double slack = 1e-12 * std::max(1.0, std::abs(obj));

                if (obj_new > obj + slack) {
                    const Vector b_try = b;
                    const double a_try = a0;
                    bool fixed = false;
                    for (int h = 1; h <= 20 && !fixed; ++h) {
                        const double t = std::ldexp(1.0, -h);
                        b = b_prev + t * (b_try - b_prev);
                        a0 = a_prev + t * (a_try - a_prev);
                        eta = d.X * b;
                        eta.array() += a0;
                        obj_new = detail::penalized_objective(d, penalty, lambda, b, eta);
                        fixed = obj_new <= obj + slack;
                    }
                    if (!fixed) {
                        // majorization round: b'' <= 1/4 everywhere
                        b = b_prev;
                        a0 = a_prev;
                        w.setConstant(0.25);
                        for (int i = 0; i < n; ++i) r(i) = 4.0 * (d.y(i) - mu(i));
                        sweeps += detail::weighted_cd<true>(d, penalty, lambda, w, r, b, a0, opt.tol,
                                                            std::max(1, opt.max_iter - sweeps), cd_ok);
                        eta = d.X * b;
                        eta.array() += a0;
                        obj_new = detail::penalized_objective(d, penalty, lambda, b, eta);
                        if (obj_new > obj + 1e-8) {
                            detail::fail(ErrorCode::solver_divergence,
                                         "fit_path: objective increased at lambda index " + std::to_string(k));
                        }
                    }
                }
                inner_ok = inner_ok && cd_ok;
                obj = obj_new;
                if (opt.trace) trace.push_back(obj);

                double change = std::abs(a0 - a_prev);
                for (int j = 0; j < p; ++j) change = std::max(change, std::abs(b(j) - b_prev(j)));
                if (change < opt.tol) {
                    outer_ok = true;
                    break;
                }
            }
            ok = outer_ok && inner_ok;
        }

        Vector beta(p);
        double intercept = a0;
        for (int j = 0; j < p; ++j) {
            beta(j) = b(j) == 0.0 ? 0.0 : b(j) / d.scale(j);
            intercept -= beta(j) * d.center(j);
        }
        path.betas.push_back(SparseCoef::from_dense(beta, opt.intercept ? intercept : 0.0));
        path.n_iter.push_back(sweeps);
        path.converged.push_back(ok ? 1 : 0);
        if (opt.trace) path.objective_trace.push_back(std::move(trace));

        eta = d.X * b;
        eta.array() += a0;
        const double null_dev = nll_null - nll_sat;
        if (null_dev > 0.0 && k + 1 < grid.size()) {
            const double ratio = (neg_log_lik(d.family, eta, d.y) - nll_sat) / null_dev;
            if (ratio < sat_ratio) {
                path.saturated = true;
                break;
            }
        }
    }
    return path;
}

/**
 * Largest violation of the first-order conditions of the penalized
 * objective at (lambda, beta), measured on the solver's scaled columns:
 * g_j = x_j'(y - mean(X beta))/n must equal rho'(|b_j|) sgn(b_j) for
 * nonzero b_j and satisfy |g_j| <= lambda otherwise.
 */
inline double kkt_residual(const Dataset& data, const PenaltySpec& penalty, double lambda, const Vector& beta,
                           const PathOptions& opt = {}, double intercept = 0.0)
{
    detail::require(beta.size() == data.p(), "kkt_residual: beta length does not match p");
    const auto d = detail::scale_design(data, opt);
    const Vector eta = linear_predictor(data.X, beta, intercept);
    Vector resid(d.n());
    for (int i = 0; i < d.n(); ++i) resid(i) = d.y(i) - d.family.mean(eta(i));
    const Vector g = d.X.transpose() * resid / static_cast<double>(d.n());

    double worst = d.intercept ? std::abs(resid.mean()) : 0.0;
    for (int j = 0; j < d.p(); ++j) {
        if (d.skip[static_cast<std::size_t>(j)]) continue;
        const double bj = beta(j) * d.scale(j);
        double viol;
        if (bj != 0.0) {
            const double target = penalty_derivative(penalty, lambda, std::abs(bj)) * (bj > 0 ? 1.0 : -1.0);
            viol = std::abs(g(j) - target);
        } else {
            viol = std::max(std::abs(g(j)) - lambda, 0.0);
        }
        worst = std::max(worst, viol);
    }
    return std::isfinite(worst) ? worst : std::numeric_limits<double>::max();
}

struct ActiveSetEntry
{
    ActiveSet set;
    int first_position = 0;
};

/// Consecutive duplicates collapsed; a set re-entered later is a new entry.
inline std::vector<ActiveSetEntry> active_set_sequence(const std::vector<ActiveSet>& sets)
{
    detail::require(!sets.empty(), "active_set_sequence: empty path");
    std::vector<ActiveSetEntry> out;
    for (int k = 0; k < static_cast<int>(sets.size()); ++k) {
        const auto& s = sets[static_cast<std::size_t>(k)];
        if (out.empty() || !(out.back().set == s)) out.push_back({s, k});
    }
    return out;
}

inline std::vector<ActiveSetEntry> active_set_sequence(const SolutionPath& path)
{
    return active_set_sequence(path.active_sets());
}

} // namespace pathcv
