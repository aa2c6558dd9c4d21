#pragma once

#include <pathcv/error.hpp>
#include <pathcv/rng.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace pathcv {

/// One validation / construction partition of {0, ..., n-1}; both sides sorted.
struct Split
{
    std::vector<int> validation;
    std::vector<int> construction;
};

enum class SplitKind { monte_carlo, kfold };

struct GuardEvent
{
    int split = 0;
    int attempts = 0;   ///< draws used, including the accepted one
    bool exhausted = false;
};

struct SplitPlan
{
    SplitKind kind = SplitKind::monte_carlo;
    int n = 0;
    int n_v = 0; ///< for kfold: the largest fold
    int n_c = 0; ///< for kfold: n minus the largest fold
    int r = 0;
    std::uint64_t seed = 0;
    std::vector<Split> splits;
    std::vector<GuardEvent> guard_log;
};

namespace detail {

inline Split partition_from_permutation(const std::vector<int>& perm, int n_c)
{
    Split s;
    s.construction.assign(perm.begin(), perm.begin() + n_c);
    s.validation.assign(perm.begin() + n_c, perm.end());
    std::sort(s.construction.begin(), s.construction.end());
    std::sort(s.validation.begin(), s.validation.end());
    return s;
}

inline bool classes_ok(const std::vector<int>& rows, std::span<const double> y)
{
    int ones = 0;
    for (int i : rows) ones += y[static_cast<std::size_t>(i)] != 0.0;
    const int zeros = static_cast<int>(rows.size()) - ones;
    return ones >= 2 && zeros >= 2;
}

} // namespace detail

/**
 * r independent uniformly random partitions with |construction| = n_c.
 * Split j draws from its own stream derived from (seed, j), so the plan is a
 * pure function of (n, n_c, r, seed). When `binary_response` is given, a
 * construction set with fewer than two observations of either class is
 * redrawn (up to 100 draws per split) and the redraw is logged.
 */
inline SplitPlan monte_carlo_splits(int n, int n_c, int r, std::uint64_t seed,
                                    std::span<const double> binary_response = {})
{
    detail::require(n_c >= 2, "monte_carlo_splits: n_c must be at least 2");
    detail::require(n_c < n, "monte_carlo_splits: n_c must be smaller than n");
    detail::require(r >= 1, "monte_carlo_splits: r must be at least 1");
    detail::require(binary_response.empty() || binary_response.size() == static_cast<std::size_t>(n),
                    "monte_carlo_splits: response length does not match n");

    SplitPlan plan;
    plan.kind = SplitKind::monte_carlo;
    plan.n = n;
    plan.n_c = n_c;
    plan.n_v = n - n_c;
    plan.r = r;
    plan.seed = seed;
    plan.splits.reserve(static_cast<std::size_t>(r));

    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int j = 0; j < r; ++j) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
        constexpr int max_attempts = 100;
        int attempt = 0;
        Split s;
        for (;;) {
            ++attempt;
            std::iota(perm.begin(), perm.end(), 0);
            rng.shuffle(perm);
            s = detail::partition_from_permutation(perm, n_c);
            if (binary_response.empty() || detail::classes_ok(s.construction, binary_response)) break;
            if (attempt == max_attempts) break;
        }
        if (attempt > 1) {
            const bool exhausted = !detail::classes_ok(s.construction, binary_response);
            plan.guard_log.push_back({j, attempt, exhausted});
        }
        plan.splits.push_back(std::move(s));
    }
    return plan;
}

/// One shuffled partition into k folds; the first n mod k folds get the extra observation.
inline SplitPlan kfold_splits(int n, int k, std::uint64_t seed)
{
    detail::require(k >= 2, "kfold_splits: k must be at least 2");
    detail::require(k <= n, "kfold_splits: k must not exceed n");
    SplitPlan plan;
    plan.kind = SplitKind::kfold;
    plan.n = n;
    plan.r = k;
    plan.seed = seed;

    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(seed, 0x6b666f6c64ULL));
    rng.shuffle(perm);

    const int base = n / k;
    const int extra = n % k;
    std::vector<int> fold_of(static_cast<std::size_t>(n));
    int pos = 0;
    for (int f = 0; f < k; ++f) {
        const int sz = base + (f < extra ? 1 : 0);
        for (int t = 0; t < sz; ++t) fold_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(pos++)])] = f;
    }
    for (int f = 0; f < k; ++f) {
        Split s;
        for (int i = 0; i < n; ++i) {
            (fold_of[static_cast<std::size_t>(i)] == f ? s.validation : s.construction).push_back(i);
        }
        plan.splits.push_back(std::move(s));
    }
    plan.n_v = base + (extra > 0 ? 1 : 0);
    plan.n_c = n - plan.n_v;
    return plan;
}

/// ceil(n^exponent), guarded against pow() landing a hair above an integer.
inline int nc_from_exponent(int n, double exponent)
{
    const double v = std::pow(static_cast<double>(n), exponent);
    const double r = std::round(v);
    return static_cast<int>(std::abs(v - r) < 1e-9 ? r : std::ceil(v));
}

} // namespace pathcv
