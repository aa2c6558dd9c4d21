#pragma once

#include <pathcv/error.hpp>
#include <pathcv/glm.hpp>
#include <pathcv/parallel.hpp>
#include <pathcv/path.hpp>
#include <pathcv/restricted.hpp>
#include <pathcv/splits.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace pathcv {

enum class Method { kfold, kfold_1se, cv_nv, ccv };
enum class Rule { min, one_se };

inline std::string method_name(Method m)
{
    switch (m) {
        case Method::kfold: return "kfold";
        case Method::kfold_1se: return "kfold_1se";
        case Method::cv_nv: return "cv_nv";
        case Method::ccv: return "ccv";
    }
    return "?";
}

inline Method parse_method(const std::string& s)
{
    if (s == "kfold") return Method::kfold;
    if (s == "kfold_1se" || s == "1se") return Method::kfold_1se;
    if (s == "cv_nv" || s == "cvnv") return Method::cv_nv;
    if (s == "ccv") return Method::ccv;
    detail::fail(ErrorCode::invalid_argument, "unknown method '" + s + "'");
}

struct CvOptions
{
    PathOptions path;
    RestrictedOptions restricted;
    int threads = 1;
    std::optional<int> size_cap; ///< ccv candidate cap; defaults per ccv_size_cap()
};

enum class CurveAxis { lambda_index, active_set_index };

/// Per-position mean validation loss over splits.
struct CvCurve
{
    CurveAxis axis = CurveAxis::lambda_index;
    std::vector<int> positions;      ///< grid index (lambda axis) or first grid index of the candidate
    std::vector<double> mean_loss;   ///< +inf where no split contributed
    std::vector<double> se_loss;
    std::vector<int> n_valid_splits;

    int size() const noexcept { return static_cast<int>(mean_loss.size()); }
};

struct SplitEvent
{
    int split = 0;
    int position = -1; ///< -1 when the event concerns the whole split
    std::string what;

    bool operator==(const SplitEvent&) const = default;
};

struct SelectionReport
{
    Method method = Method::kfold;
    int selected_position = 0;      ///< index into curve
    int selected_path_position = 0; ///< grid index on the whole-data path
    std::optional<double> selected_lambda;
    ActiveSet selected_active;
    RestrictedFit refit;
    std::optional<SparseCoef> penalized; ///< whole-data penalized fit at the choice (kfold rules)
    CvCurve curve;
    std::vector<SplitEvent> split_log;
    std::optional<int> truncated_at; ///< ccv: first candidate index dropped by the size cap
    int size_cap = 0;

    /// Coefficients used for prediction: penalized fit for the kfold rules, refit otherwise.
    Vector coef() const { return penalized ? penalized->dense() : refit.full_coef; }
    double intercept() const { return penalized ? penalized->intercept : refit.intercept; }
};

/// Penalized paths fitted on every construction set of a plan.
struct SplitPathResults
{
    std::vector<std::vector<double>> losses;          ///< [split][grid index]
    std::vector<std::vector<ActiveSet>> active_sets;  ///< [split][grid index], empty on failure
    std::vector<std::vector<double>> lambdas;         ///< the grid each split used
    std::vector<int> path_length;                     ///< fitted points per split, 0 on failure
    std::vector<SplitEvent> events;
};

namespace detail {

/// Per-observation neg_log_lik of the saturated fit: -y^2/2 (gaussian), 0 (binomial, y in {0,1}).
/// Validation losses are reported relative to it, so fold-to-fold variation in
/// the response alone does not enter the standard errors.
inline double saturated_nll(const GlmFamily& family, double y)
{
    return family.kind == FamilyKind::gaussian ? -0.5 * y * y : 0.0;
}

inline double validation_nll(const Dataset& data, const std::vector<int>& rows, const SparseCoef& beta)
{
    double sum = 0.0;
    for (int i : rows) {
        double eta = beta.intercept;
        for (int t = 0; t < beta.support.size(); ++t) {
            eta += data.X(i, beta.support[t]) * beta.values[static_cast<std::size_t>(t)];
        }
        sum += -data.y(i) * eta + data.family.cumulant(eta) - saturated_nll(data.family, data.y(i));
    }
    return sum / static_cast<double>(rows.size());
}

inline double restricted_validation_nll(const Dataset& data, const std::vector<int>& rows, const RestrictedFit& fit)
{
    double sum = 0.0;
    for (int i : rows) {
        double eta = fit.intercept;
        for (int t = 0; t < fit.active.size(); ++t) eta += data.X(i, fit.active[t]) * fit.coef(t);
        sum += -data.y(i) * eta + data.family.cumulant(eta) - saturated_nll(data.family, data.y(i));
    }
    return sum / static_cast<double>(rows.size());
}

/// Mean and standard error over the finite entries of each column of losses.
inline CvCurve curve_from_losses(const std::vector<std::vector<double>>& losses, int width, CurveAxis axis)
{
    CvCurve c;
    c.axis = axis;
    c.positions.resize(static_cast<std::size_t>(width));
    c.mean_loss.assign(static_cast<std::size_t>(width), std::numeric_limits<double>::infinity());
    c.se_loss.assign(static_cast<std::size_t>(width), 0.0);
    c.n_valid_splits.assign(static_cast<std::size_t>(width), 0);
    for (int k = 0; k < width; ++k) {
        c.positions[static_cast<std::size_t>(k)] = k;
        double sum = 0.0;
        int cnt = 0;
        for (const auto& row : losses) {
            const double v = row[static_cast<std::size_t>(k)];
            if (std::isfinite(v)) {
                sum += v;
                ++cnt;
            }
        }
        c.n_valid_splits[static_cast<std::size_t>(k)] = cnt;
        if (cnt == 0) continue;
        const double mean = sum / cnt;
        double ss = 0.0;
        for (const auto& row : losses) {
            const double v = row[static_cast<std::size_t>(k)];
            if (std::isfinite(v)) ss += (v - mean) * (v - mean);
        }
        c.mean_loss[static_cast<std::size_t>(k)] = mean;
        c.se_loss[static_cast<std::size_t>(k)] = cnt > 1 ? std::sqrt(ss / (cnt - 1)) / std::sqrt(cnt) : 0.0;
    }
    return c;
}

/// First (sparsest) position attaining the minimum among positions with at least min_valid splits.
inline std::optional<int> argmin_position(const CvCurve& c, int min_valid = 1)
{
    std::optional<int> best;
    for (int k = 0; k < c.size(); ++k) {
        const auto ks = static_cast<std::size_t>(k);
        if (c.n_valid_splits[ks] < min_valid || !std::isfinite(c.mean_loss[ks])) continue;
        if (!best || c.mean_loss[ks] < c.mean_loss[static_cast<std::size_t>(*best)]) best = k;
    }
    return best;
}

} // namespace detail

/**
 * Largest-lambda position whose mean loss is within one standard error of
 * the minimum (the standard error taken at the minimizer).
 */
inline std::optional<int> one_se_position(const CvCurve& c)
{
    const auto kmin = detail::argmin_position(c);
    if (!kmin) return std::nullopt;
    const auto km = static_cast<std::size_t>(*kmin);
    const double threshold = c.mean_loss[km] + c.se_loss[km];
    for (int k = 0; k <= *kmin; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        if (c.n_valid_splits[ks] >= 1 && c.mean_loss[ks] <= threshold) return k;
    }
    return kmin;
}

/**
 * Fits the penalized path on each construction set with the shared grid and
 * scores every grid point on the matching validation set. A split whose fit
 * throws contributes no losses; non-converged grid points are scored but
 * logged. Points past the end of a saturated split path stay NaN.
 */
inline SplitPathResults fit_split_paths(const Dataset& data, const PenaltySpec& penalty, const LambdaGrid& grid,
                                        const SplitPlan& plan, const CvOptions& opt)
{
    const int r = static_cast<int>(plan.splits.size());
    const int width = grid.size();
    SplitPathResults res;
    res.losses.assign(static_cast<std::size_t>(r),
                      std::vector<double>(static_cast<std::size_t>(width), std::numeric_limits<double>::quiet_NaN()));
    res.active_sets.assign(static_cast<std::size_t>(r), {});
    res.lambdas.assign(static_cast<std::size_t>(r), grid.values);
    res.path_length.assign(static_cast<std::size_t>(r), 0);
    std::vector<std::vector<SplitEvent>> events(static_cast<std::size_t>(r));

    parallel_for(r, opt.threads, [&](int j) {
        const auto js = static_cast<std::size_t>(j);
        const Split& s = plan.splits[js];
        try {
            const Dataset sub = subset_rows(data, s.construction);
            const SolutionPath sp = fit_path(sub, penalty, grid, opt.path);
            for (int k = 0; k < sp.size(); ++k) {
                const auto ks = static_cast<std::size_t>(k);
                res.losses[js][ks] = detail::validation_nll(data, s.validation, sp.betas[ks]);
                if (!sp.converged[ks]) events[js].push_back({j, k, "nonconverged"});
            }
            if (sp.saturated) events[js].push_back({j, sp.size(), "saturated"});
            res.active_sets[js] = sp.active_sets();
            res.path_length[js] = sp.size();
        } catch (const Error& e) {
            events[js].push_back({j, -1, std::string("path_error: ") + e.what()});
        }
    });
    for (auto& ev : events) res.events.insert(res.events.end(), ev.begin(), ev.end());
    return res;
}

namespace detail {

inline SelectionReport penalized_selection(const Dataset& data, const SolutionPath& full, const SplitPlan& plan,
                                           Method method, const CvOptions& opt)
{
    const SplitPathResults sp = fit_split_paths(data, full.penalty, full.grid, plan, opt);
    SelectionReport rep;
    rep.method = method;
    // the curve stops where the shortest successful split path (or the whole-data path) stops
    int width = full.size();
    for (int len : sp.path_length)
        if (len > 0) width = std::min(width, len);
    rep.curve = curve_from_losses(sp.losses, width, CurveAxis::lambda_index);
    rep.split_log = sp.events;
    for (const auto& g : plan.guard_log) {
        rep.split_log.push_back({g.split, -1, g.exhausted ? "class_guard_exhausted" : "class_guard_redraw"});
    }

    std::optional<int> pick = method == Method::kfold_1se ? one_se_position(rep.curve) : argmin_position(rep.curve);
    if (!pick) fail(ErrorCode::selection_failed, method_name(method) + ": every grid point was excluded");

    const auto ks = static_cast<std::size_t>(*pick);
    rep.selected_position = *pick;
    rep.selected_path_position = *pick;
    rep.selected_lambda = full.grid[*pick];
    rep.selected_active = full.active_set(*pick);
    if (method == Method::kfold || method == Method::kfold_1se) rep.penalized = full.betas[ks];
    RestrictedOptions ro = opt.restricted;
    ro.intercept = opt.path.intercept;
    rep.refit = fit_restricted(data, rep.selected_active, ro);
    return rep;
}

} // namespace detail

/// K-fold CV on a precomputed whole-data path.
inline SelectionReport kfold_cv(const Dataset& data, const SolutionPath& full, const SplitPlan& folds, Rule rule,
                                const CvOptions& opt = {})
{
    return detail::penalized_selection(data, full, folds, rule == Rule::min ? Method::kfold : Method::kfold_1se, opt);
}

inline SelectionReport kfold_cv(const Dataset& data, const PenaltySpec& penalty, const LambdaGrid& grid, int k,
                                Rule rule, std::uint64_t seed, const CvOptions& opt = {})
{
    const SolutionPath full = fit_path(data, penalty, grid, opt.path);
    return kfold_cv(data, full, kfold_splits(data.n(), k, seed), rule, opt);
}

/// Monte-Carlo leave-n_v-out CV on a precomputed whole-data path.
inline SelectionReport cv_nv(const Dataset& data, const SolutionPath& full, const SplitPlan& plan,
                             const CvOptions& opt = {})
{
    return detail::penalized_selection(data, full, plan, Method::cv_nv, opt);
}

inline SelectionReport cv_nv(const Dataset& data, const PenaltySpec& penalty, const LambdaGrid& grid,
                             const SplitPlan& plan, const CvOptions& opt = {})
{
    const SolutionPath full = fit_path(data, penalty, grid, opt.path);
    return cv_nv(data, full, plan, opt);
}

/// Candidate cap for ccv: the default cap at the whole-data size, kept
/// identifiable on the construction sets (n_c - 2, minus one more with an intercept).
inline int ccv_size_cap(int n, int p, int n_c, bool intercept = false)
{
    return std::max(0, std::min(default_size_cap(n, p), n_c - 2 - (intercept ? 1 : 0)));
}

/**
 * Scores explicit candidate sets the way ccv does: restricted MLE on every
 * construction set, validation neg_log_lik on the matching validation set.
 * Failed refits score +inf and are left out of the average; a candidate needs
 * finite losses on at least ceil(r/2) splits to be eligible, except that a
 * lone candidate is returned unconditionally. The winner is refitted on all
 * observations. selected_lambda stays empty.
 */
inline SelectionReport ccv_select(const Dataset& data, const std::vector<ActiveSetEntry>& candidates,
                                  const SplitPlan& plan, const CvOptions& opt = {})
{
    if (candidates.empty()) detail::fail(ErrorCode::selection_failed, "ccv: no candidate within the size cap");
    SelectionReport rep;
    rep.method = Method::ccv;
    const int r = static_cast<int>(plan.splits.size());
    const int nc = static_cast<int>(candidates.size());
    RestrictedOptions ro = opt.restricted;
    ro.intercept = opt.path.intercept;

    std::vector<std::vector<double>> losses(static_cast<std::size_t>(r),
                                            std::vector<double>(static_cast<std::size_t>(nc)));
    std::vector<std::vector<SplitEvent>> events(static_cast<std::size_t>(r));
    parallel_for(r, opt.threads, [&](int j) {
        const auto js = static_cast<std::size_t>(j);
        const Split& s = plan.splits[js];
        for (int c = 0; c < nc; ++c) {
            const auto fit = detail::fit_restricted_rows(data.X, data.y, data.family, s.construction,
                                                         candidates[static_cast<std::size_t>(c)].set, ro);
            if (!fit.converged) {
                losses[js][static_cast<std::size_t>(c)] = std::numeric_limits<double>::infinity();
                events[js].push_back({j, c, "restricted_failed"});
            } else {
                losses[js][static_cast<std::size_t>(c)] = detail::restricted_validation_nll(data, s.validation, fit);
            }
        }
    });
    for (auto& ev : events) rep.split_log.insert(rep.split_log.end(), ev.begin(), ev.end());
    for (const auto& g : plan.guard_log) {
        rep.split_log.push_back({g.split, -1, g.exhausted ? "class_guard_exhausted" : "class_guard_redraw"});
    }

    rep.curve = detail::curve_from_losses(losses, nc, CurveAxis::active_set_index);
    for (int c = 0; c < nc; ++c) {
        rep.curve.positions[static_cast<std::size_t>(c)] = candidates[static_cast<std::size_t>(c)].first_position;
    }

    std::optional<int> pick;
    if (nc == 1) {
        pick = 0;
    } else {
        pick = detail::argmin_position(rep.curve, (r + 1) / 2);
    }
    if (!pick) {
        std::string starved;
        for (int c = 0; c < nc; ++c) {
            if (!starved.empty()) starved += ",";
            starved += std::to_string(c) + "(" + std::to_string(rep.curve.n_valid_splits[static_cast<std::size_t>(c)]) +
                       "/" + std::to_string(r) + ")";
        }
        detail::fail(ErrorCode::selection_failed,
                     "ccv: no candidate has finite losses on ceil(r/2) splits; candidates(valid/r): " + starved);
    }

    const auto& chosen = candidates[static_cast<std::size_t>(*pick)];
    rep.selected_position = *pick;
    rep.selected_path_position = chosen.first_position;
    rep.selected_active = chosen.set;
    rep.refit = fit_restricted(data, chosen.set, ro);
    return rep;
}

/**
 * Consistent cross-validation: the deduplicated active-set sequence of the
 * whole-data path, cut at the first set larger than size_cap, scored by
 * ccv_select.
 */
inline SelectionReport ccv(const Dataset& data, const SolutionPath& full, const SplitPlan& plan, int size_cap,
                           const CvOptions& opt = {})
{
    auto seq = active_set_sequence(full);
    std::optional<int> truncated;
    for (std::size_t c = 0; c < seq.size(); ++c) {
        if (seq[c].set.size() > size_cap) {
            truncated = static_cast<int>(c);
            seq.resize(c);
            break;
        }
    }
    SelectionReport rep = ccv_select(data, seq, plan, opt);
    rep.size_cap = size_cap;
    rep.truncated_at = truncated;
    if (truncated) rep.split_log.push_back({-1, *truncated, "candidates_truncated"});
    rep.selected_lambda = full.grid[rep.selected_path_position];
    return rep;
}

inline SelectionReport ccv(const Dataset& data, const PenaltySpec& penalty, const LambdaGrid& grid,
                           const SplitPlan& plan, std::optional<int> size_cap = std::nullopt,
                           const CvOptions& opt = {})
{
    const SolutionPath full = fit_path(data, penalty, grid, opt.path);
    const int cap = size_cap.value_or(ccv_size_cap(data.n(), data.p(), plan.n_c, opt.path.intercept));
    return ccv(data, full, plan, cap, opt);
}

/// Default construction-set size for a method, as ceil(n^a):
/// cv_nv a = 2/3 (gaussian) or 3/4 (binomial); ccv a = 1/2 or 2/3.
inline int default_nc(Method m, FamilyKind fam, int n)
{
    const bool g = fam == FamilyKind::gaussian;
    if (m == Method::cv_nv) return nc_from_exponent(n, g ? 2.0 / 3.0 : 3.0 / 4.0);
    return nc_from_exponent(n, g ? 0.5 : 2.0 / 3.0);
}

} // namespace pathcv
