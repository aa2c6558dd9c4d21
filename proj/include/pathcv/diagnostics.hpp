#pragma once

#include <pathcv/error.hpp>
#include <pathcv/glm.hpp>
#include <pathcv/parallel.hpp>
#include <pathcv/path.hpp>
#include <pathcv/restricted.hpp>
#include <pathcv/rng.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pathcv {

/// Plot-ready (position, value) pairs.
struct Series
{
    std::string x_name = "position";
    std::string y_name = "value";
    std::vector<double> x;
    std::vector<double> y;
};

struct CoherentRateSeries
{
    std::vector<double> cr;
    std::optional<int> cv_choice_position;
    std::optional<int> first_noise_position;
};

/// Fraction of split paths whose active set at each position equals the full path's.
inline CoherentRateSeries coherent_rate(const std::vector<ActiveSet>& full,
                                        const std::vector<std::vector<ActiveSet>>& splits)
{
    detail::require(!splits.empty(), "coherent_rate: no split paths");
    for (const auto& s : splits) {
        detail::require(s.size() == full.size(), "coherent_rate: split path length " + std::to_string(s.size()) +
                                                     " differs from full path length " + std::to_string(full.size()));
    }
    CoherentRateSeries out;
    out.cr.resize(full.size());
    const double r = static_cast<double>(splits.size());
    for (std::size_t k = 0; k < full.size(); ++k) {
        int match = 0;
        for (const auto& s : splits) match += s[k] == full[k];
        out.cr[k] = match / r;
    }
    return out;
}

/// First position whose active set contains an index outside `truth`.
inline std::optional<int> first_noise_position(const std::vector<ActiveSet>& path, const ActiveSet& truth)
{
    for (std::size_t k = 0; k < path.size(); ++k) {
        for (int j : path[k].indices()) {
            if (!truth.contains(j)) return static_cast<int>(k);
        }
    }
    return std::nullopt;
}

/// Mean of cr over positions from `from` on; nullopt when nothing is left.
inline std::optional<double> mean_cr_from(const CoherentRateSeries& s, int from)
{
    if (from < 0 || from >= static_cast<int>(s.cr.size())) return std::nullopt;
    double sum = 0.0;
    for (std::size_t k = static_cast<std::size_t>(from); k < s.cr.size(); ++k) sum += s.cr[k];
    return sum / static_cast<double>(s.cr.size() - static_cast<std::size_t>(from));
}

struct ShrinkageRecord
{
    double lambda = 0.0;
    int d_alpha = 0;
    double gamma_hat = 0.0;   ///< (1/n)||y - X beta_hat||^2
    double gamma_tilde = 0.0; ///< (1/n)||y - X beta_tilde||^2, restricted LS on the active set
    double shrink_term = 0.0; ///< lambda^2 d
    double gap = 0.0;
};

/**
 * In-sample losses of the penalized fit and of the least-squares refit on the
 * same active set, one record per supplied solution. Losses are mean squared
 * residuals, the scale on which gamma_hat - gamma_tilde = lambda^2 d holds
 * exactly when X'X/n = I. The gap is reported, never asserted.
 */
inline std::vector<ShrinkageRecord> shrinkage_decomposition(const Dataset& data, const std::vector<double>& lambdas,
                                                            const std::vector<Vector>& betas)
{
    detail::require(data.family.kind == FamilyKind::gaussian, "shrinkage_decomposition: gaussian family only");
    detail::require(lambdas.size() == betas.size(), "shrinkage_decomposition: lambdas and betas differ in length");
    const double n = data.n();
    std::vector<ShrinkageRecord> out;
    out.reserve(betas.size());
    for (std::size_t k = 0; k < betas.size(); ++k) {
        const Vector& b = betas[k];
        detail::require(b.size() == data.p(), "shrinkage_decomposition: coefficient length does not match p");
        ShrinkageRecord rec;
        rec.lambda = lambdas[k];
        std::vector<int> idx;
        for (int j = 0; j < b.size(); ++j)
            if (b(j) != 0.0) idx.push_back(j);
        const ActiveSet a(idx);
        rec.d_alpha = a.size();
        rec.gamma_hat = (data.y - data.X * b).squaredNorm() / n;
        const auto fit = fit_restricted(data, a);
        rec.gamma_tilde = (data.y - data.X * fit.full_coef).squaredNorm() / n;
        rec.shrink_term = rec.lambda * rec.lambda * rec.d_alpha;
        rec.gap = rec.gamma_hat - rec.gamma_tilde - rec.shrink_term;
        out.push_back(rec);
    }
    return out;
}

inline std::vector<ShrinkageRecord> shrinkage_decomposition(const Dataset& data, const SolutionPath& path)
{
    detail::require(path.penalty.kind == PenaltyKind::lasso, "shrinkage_decomposition: lasso path only");
    detail::require(!path.options.intercept, "shrinkage_decomposition: path fitted with an intercept");
    std::vector<double> lambdas;
    std::vector<Vector> betas;
    for (int k = 0; k < path.size(); ++k) {
        lambdas.push_back(path.grid[k]);
        betas.push_back(path.dense(k));
    }
    return shrinkage_decomposition(data, lambdas, betas);
}

enum class NoiseModel { iid, ar1 };

struct OrderStatOptions
{
    NoiseModel model = NoiseModel::iid;
    double rho = 0.0;               ///< ar1 only
    std::vector<double> mean_shifts; ///< empty or length p
    int threads = 1;
};

/**
 * Monte-Carlo estimate of P{k T_k^2 > l T_l^2}, where T_m is the (m+1)-th
 * largest of |S_1|, ..., |S_p| and S is standard Gaussian (iid or AR(1))
 * plus optional mean shifts. Trial t draws from its own stream.
 */
inline double order_stat_probability(int p, int k, int l, int trials, std::uint64_t seed, const OrderStatOptions& opt = {})
{
    detail::require(l >= 2 && l < k && k < p, "order_stat_probability: need 2 <= l < k < p");
    detail::require(trials >= 1, "order_stat_probability: trials must be positive");
    detail::require(opt.mean_shifts.empty() || static_cast<int>(opt.mean_shifts.size()) == p,
                    "order_stat_probability: mean_shifts length does not match p");
    detail::require(opt.model == NoiseModel::iid || std::abs(opt.rho) < 1.0, "order_stat_probability: |rho| must be < 1");

    std::vector<char> hit(static_cast<std::size_t>(trials), 0);
    const double innov = std::sqrt(1.0 - opt.rho * opt.rho);
    parallel_for(trials, opt.threads, [&](int t) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
        std::vector<double> a(static_cast<std::size_t>(p));
        double prev = 0.0;
        for (int i = 0; i < p; ++i) {
            double z = rng.normal();
            if (opt.model == NoiseModel::ar1) {
                z = i == 0 ? z : opt.rho * prev + innov * z;
                prev = z;
            }
            if (!opt.mean_shifts.empty()) z += opt.mean_shifts[static_cast<std::size_t>(i)];
            a[static_cast<std::size_t>(i)] = std::abs(z);
        }
        // largest first; positions l and k hold T_l and T_k
        std::nth_element(a.begin(), a.begin() + k, a.end(), std::greater<>());
        std::sort(a.begin(), a.begin() + k + 1, std::greater<>());
        const double tk = a[static_cast<std::size_t>(k)];
        const double tl = a[static_cast<std::size_t>(l)];
        hit[static_cast<std::size_t>(t)] = k * tk * tk > l * tl * tl;
    });
    long count = 0;
    for (char h : hit) count += h;
    return static_cast<double>(count) / trials;
}

struct TheoreticalLambdaPoint
{
    int position = 0;
    int d_alpha = 0;
    double lambda = 0.0;
    double ratio = 0.0;  ///< lambda / (sigma sqrt(2 log(p - d) / n_c))
    double shrink = 0.0; ///< lambda^2 d
};

inline double theoretical_lambda(int p, int d, int n_c, double sigma)
{
    return sigma * std::sqrt(2.0 * std::log(static_cast<double>(p - d)) / n_c);
}

/// Ratio of each path lambda to its theoretical value; positions with p - d <= 1 are skipped.
inline std::vector<TheoreticalLambdaPoint> theoretical_lambda_series(const SolutionPath& path, int n_c, double sigma)
{
    detail::require(path.size() >= 1, "theoretical_lambda_series: empty path");
    detail::require(n_c >= 1 && sigma > 0.0, "theoretical_lambda_series: need n_c >= 1 and sigma > 0");
    std::vector<TheoreticalLambdaPoint> out;
    for (int k = 0; k < path.size(); ++k) {
        const int d = path.active_set(k).size();
        if (path.p - d <= 1) continue;
        TheoreticalLambdaPoint pt;
        pt.position = k;
        pt.d_alpha = d;
        pt.lambda = path.grid[k];
        pt.ratio = pt.lambda / theoretical_lambda(path.p, d, n_c, sigma);
        pt.shrink = pt.lambda * pt.lambda * d;
        out.push_back(pt);
    }
    return out;
}

/// sigma sqrt(2 log p / n).
inline double universal_threshold(int n, int p, double sigma)
{
    detail::require(n >= 1 && p >= 2 && sigma >= 0.0, "universal_threshold: need n >= 1, p >= 2, sigma >= 0");
    return sigma * std::sqrt(2.0 * std::log(static_cast<double>(p)) / n);
}

} // namespace pathcv
