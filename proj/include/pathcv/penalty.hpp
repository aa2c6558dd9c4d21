#pragma once

#include <pathcv/error.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace pathcv {

enum class PenaltyKind { lasso, scad, mcp };

/// Separable penalty rho(|b|; lambda, gamma). gamma is ignored for lasso.
struct PenaltySpec
{
    PenaltyKind kind = PenaltyKind::lasso;
    double gamma = std::numeric_limits<double>::infinity();

    static PenaltySpec lasso() { return {PenaltyKind::lasso, std::numeric_limits<double>::infinity()}; }
    static PenaltySpec scad(double gamma = 3.0) { return checked({PenaltyKind::scad, gamma}); }
    static PenaltySpec mcp(double gamma = 3.0) { return checked({PenaltyKind::mcp, gamma}); }

    void validate() const
    {
        if (kind == PenaltyKind::scad) detail::require(gamma > 2.0, "scad requires gamma > 2");
        if (kind == PenaltyKind::mcp) detail::require(gamma > 1.0, "mcp requires gamma > 1");
    }

    bool operator==(const PenaltySpec& o) const
    {
        return kind == o.kind && (kind == PenaltyKind::lasso || gamma == o.gamma);
    }

private:
    static PenaltySpec checked(PenaltySpec s)
    {
        s.validate();
        return s;
    }
};

inline std::string penalty_name(PenaltyKind k)
{
    switch (k) {
        case PenaltyKind::lasso: return "lasso";
        case PenaltyKind::scad: return "scad";
        case PenaltyKind::mcp: return "mcp";
    }
    return "?";
}

inline PenaltySpec parse_penalty(const std::string& s, double gamma = 3.0)
{
    if (s == "lasso") return PenaltySpec::lasso();
    if (s == "scad") return PenaltySpec::scad(gamma);
    if (s == "mcp") return PenaltySpec::mcp(gamma);
    detail::fail(ErrorCode::invalid_argument, "unknown penalty '" + s + "'");
}

/// rho(t) for t >= 0.
inline double penalty_value(const PenaltySpec& pen, double lambda, double t) noexcept
{
    const double g = pen.gamma;
    switch (pen.kind) {
        case PenaltyKind::lasso:
            return lambda * t;
        case PenaltyKind::scad:
            if (t <= lambda) return lambda * t;
            if (t <= g * lambda) return (2.0 * g * lambda * t - t * t - lambda * lambda) / (2.0 * (g - 1.0));
            return lambda * lambda * (g + 1.0) / 2.0;
        case PenaltyKind::mcp:
            if (t <= g * lambda) return lambda * t - t * t / (2.0 * g);
            return g * lambda * lambda / 2.0;
    }
    return 0.0;
}

/// rho'(t) for t >= 0 (right derivative at 0, which is lambda for all three).
inline double penalty_derivative(const PenaltySpec& pen, double lambda, double t) noexcept
{
    const double g = pen.gamma;
    switch (pen.kind) {
        case PenaltyKind::lasso:
            return lambda;
        case PenaltyKind::scad:
            if (t <= lambda) return lambda;
            return std::max(g * lambda - t, 0.0) / (g - 1.0);
        case PenaltyKind::mcp:
            return std::max(lambda - t / g, 0.0);
    }
    return 0.0;
}

namespace detail {

/// One quadratic piece of rho on [lo, hi]: rho(t) = c0 + c1 t + c2 t^2 / 2.
struct PenaltyPiece
{
    double lo, hi, c0, c1, c2;
};

inline int penalty_pieces(const PenaltySpec& pen, double lambda, std::array<PenaltyPiece, 3>& out)
{
    constexpr double inf = std::numeric_limits<double>::infinity();
    const double g = pen.gamma;
    switch (pen.kind) {
        case PenaltyKind::lasso:
            out[0] = {0.0, inf, 0.0, lambda, 0.0};
            return 1;
        case PenaltyKind::scad:
            out[0] = {0.0, lambda, 0.0, lambda, 0.0};
            out[1] = {lambda, g * lambda, -lambda * lambda / (2.0 * (g - 1.0)), g * lambda / (g - 1.0),
                      -1.0 / (g - 1.0)};
            out[2] = {g * lambda, inf, lambda * lambda * (g + 1.0) / 2.0, 0.0, 0.0};
            return 3;
        case PenaltyKind::mcp:
            out[0] = {0.0, g * lambda, 0.0, lambda, -1.0 / g};
            out[1] = {g * lambda, inf, g * lambda * lambda / 2.0, 0.0, 0.0};
            return 2;
    }
    return 0;
}

} // namespace detail

/**
 * Global minimizer over b of  (v/2) b^2 - u b + rho(|b|; lambda, gamma),  v > 0.
 *
 * This is the exact coordinate update of coordinate descent: with
 * u = x_j'r/n + v b_j it performs the penalized univariate step. When the
 * univariate problem is convex the piece containing the stationary point is
 * returned in closed form; otherwise every piece's constrained minimizer is
 * compared and ties go to the smaller magnitude.
 */
inline double penalized_univariate_min(const PenaltySpec& pen, double lambda, double v, double u) noexcept
{
    const double a = std::abs(u);
    std::array<detail::PenaltyPiece, 3> pieces{};
    const int np = detail::penalty_pieces(pen, lambda, pieces);

    double min_curv = std::numeric_limits<double>::infinity();
    for (int i = 0; i < np; ++i) min_curv = std::min(min_curv, v + pieces[static_cast<std::size_t>(i)].c2);

    double t = 0.0;
    if (min_curv > 0.0) {
        if (a <= lambda) return 0.0;
        for (int i = 0; i < np; ++i) {
            const auto& pc = pieces[static_cast<std::size_t>(i)];
            const double stat = (a - pc.c1) / (v + pc.c2);
            if (stat <= pc.lo) {
                t = pc.lo;
                break;
            }
            if (stat <= pc.hi) {
                t = stat;
                break;
            }
        }
    } else {
        auto g = [&](double tt) { return 0.5 * v * tt * tt - a * tt + penalty_value(pen, lambda, tt); };
        double best_val = 0.0; // g(0)
        for (int i = 0; i < np; ++i) {
            const auto& pc = pieces[static_cast<std::size_t>(i)];
            const double k = v + pc.c2;
            double cands[3] = {pc.lo, pc.hi, pc.lo};
            if (k > 0.0) cands[2] = std::clamp((a - pc.c1) / k, pc.lo, pc.hi);
            for (double c : cands) {
                if (!std::isfinite(c)) continue;
                const double val = g(c);
                if (val < best_val || (val == best_val && c < t)) {
                    best_val = val;
                    t = c;
                }
            }
        }
    }
    return u > 0 ? t : -t;
}

} // namespace pathcv
