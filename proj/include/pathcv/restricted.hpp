#pragma once

#include <pathcv/error.hpp>
#include <pathcv/glm.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace pathcv {

/// Unpenalized MLE using only the columns in `active`.
struct RestrictedFit
{
    ActiveSet active;
    Vector coef;      ///< length d, ordered as active.indices()
    Vector full_coef; ///< length p, zero off the active set
    double intercept = 0.0;
    double neg_log_lik = 0.0;
    bool converged = false;
    double grad_norm = 0.0;
    int iterations = 0;
};

struct RestrictedOptions
{
    int max_iter = 100; ///< Newton iterations (binomial)
    bool intercept = false;
    double grad_tol = 1e-6;
};

/// min(n - 2, floor(2 sqrt(n / log(max(p, 3))))): the largest candidate size worth fitting.
inline int default_size_cap(int n, int p)
{
    const double q = 2.0 * std::sqrt(static_cast<double>(n) / std::log(std::max(p, 3)));
    return std::max(0, std::min(n - 2, static_cast<int>(std::floor(q))));
}

namespace detail {

inline Matrix gather_design(const Matrix& X, std::span<const int> rows, const ActiveSet& active, bool intercept)
{
    const int d = active.size() + (intercept ? 1 : 0);
    Matrix Xa(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        int c = 0;
        if (intercept) Xa(static_cast<Eigen::Index>(i), c++) = 1.0;
        for (int j : active.indices()) Xa(static_cast<Eigen::Index>(i), c++) = X(rows[i], j);
    }
    return Xa;
}

inline double nll_of(const GlmFamily& fam, const Vector& eta, const Vector& y)
{
    double s = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) s += -y(i) * eta(i) + fam.cumulant(eta(i));
    return s / static_cast<double>(eta.size());
}

inline Vector score(const GlmFamily& fam, const Matrix& Xa, const Vector& eta, const Vector& y)
{
    Vector resid(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) resid(i) = y(i) - fam.mean(eta(i));
    return Xa.transpose() * resid / static_cast<double>(y.size());
}

/// Fit on a row subset of (X, y) without materializing the full subset.
inline RestrictedFit fit_restricted_rows(const Matrix& X, const Vector& y, const GlmFamily& family,
                                         std::span<const int> rows, const ActiveSet& active,
                                         const RestrictedOptions& opt)
{
    const int p = static_cast<int>(X.cols());
    for (int j : active.indices()) require(j < p, "fit_restricted: active index out of range");

    RestrictedFit fit;
    fit.active = active;
    fit.full_coef = Vector::Zero(p);
    const Matrix Xa = gather_design(X, rows, active, opt.intercept);
    Vector ys(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) ys(static_cast<Eigen::Index>(i)) = y(rows[i]);
    const double m = static_cast<double>(rows.size());
    const Eigen::Index q = Xa.cols();

    Vector theta = Vector::Zero(q);
    if (q == 0) {
        fit.converged = true;
    } else if (family.kind == FamilyKind::gaussian) {
        Eigen::ColPivHouseholderQR<Matrix> qr(Xa);
        theta = qr.solve(ys);
        fit.converged = qr.rank() == q;
        fit.iterations = 1;
    } else {
        Vector eta = Vector::Zero(static_cast<Eigen::Index>(rows.size()));
        double nll = nll_of(family, eta, ys);
        double last_step = std::numeric_limits<double>::infinity();
        for (int it = 0; it < opt.max_iter; ++it) {
            const Vector g = score(family, Xa, eta, ys);
            if (g.norm() <= opt.grad_tol && last_step < 1e-8 * (1.0 + theta.cwiseAbs().maxCoeff())) {
                fit.converged = true;
                break;
            }
            fit.iterations = it + 1;
            Vector wts(eta.size());
            for (Eigen::Index i = 0; i < eta.size(); ++i) wts(i) = family.variance(eta(i));
            const Matrix H = Xa.transpose() * wts.asDiagonal() * Xa / m;
            Eigen::LLT<Matrix> llt(H);
            if (llt.info() != Eigen::Success) break;
            const Vector step = llt.solve(g);
            if (!step.allFinite()) break;
            double t = 1.0;
            bool accepted = false;
            for (int h = 0; h <= 20; ++h) {
                const Vector cand = theta + t * step;
                const Vector eta_c = Xa * cand;
                const double nll_c = nll_of(family, eta_c, ys);
                if (std::isfinite(nll_c) && nll_c <= nll + 1e-14 * std::max(1.0, std::abs(nll))) {
                    theta = cand;
                    eta = eta_c;
                    nll = nll_c;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if (!accepted) break;
            last_step = t * step.cwiseAbs().maxCoeff();
        }
    }

    const Vector eta = Xa * theta;
    fit.neg_log_lik = rows.empty() ? 0.0 : nll_of(family, q == 0 ? Vector::Zero(ys.size()).eval() : eta, ys);
    fit.grad_norm = q == 0 ? 0.0 : score(family, Xa, eta, ys).norm();
    if (fit.grad_norm > opt.grad_tol) fit.converged = false;

    int c = 0;
    if (opt.intercept) fit.intercept = theta(c++);
    fit.coef = theta.tail(active.size());
    for (int i = 0; i < active.size(); ++i) fit.full_coef(active[i]) = fit.coef(i);
    return fit;
}

} // namespace detail

/**
 * Restricted MLE on the columns of `active`. Gaussian fits are least squares
 * by column-pivoted QR; binomial fits run damped Newton from zero. Singular
 * designs and non-converged Newton runs (complete separation, for instance)
 * come back with converged = false and the last iterate.
 */
inline RestrictedFit fit_restricted(const Dataset& data, const ActiveSet& active, int size_cap,
                                    const RestrictedOptions& opt = {})
{
    if (active.size() > size_cap) {
        detail::fail(ErrorCode::oversize_model, "fit_restricted: model size " + std::to_string(active.size()) +
                                                    " exceeds cap " + std::to_string(size_cap));
    }
    std::vector<int> rows(static_cast<std::size_t>(data.n()));
    std::iota(rows.begin(), rows.end(), 0);
    return detail::fit_restricted_rows(data.X, data.y, data.family, rows, active, opt);
}

inline RestrictedFit fit_restricted(const Dataset& data, const ActiveSet& active,
                                    const RestrictedOptions& opt = {})
{
    return fit_restricted(data, active, std::numeric_limits<int>::max(), opt);
}

} // namespace pathcv
