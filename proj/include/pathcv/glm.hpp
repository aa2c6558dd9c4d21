#pragma once

#include <pathcv/error.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pathcv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class FamilyKind { gaussian, binomial };

/**
 * Canonical-link exponential family. The dispersion is treated as known:
 * Gaussian losses are reported up to the affine factor sigma^2, so the
 * loss is (theta^2/2 - y theta) per observation.
 */
struct GlmFamily
{
    FamilyKind kind = FamilyKind::gaussian;

    static GlmFamily gaussian() { return {FamilyKind::gaussian}; }
    static GlmFamily binomial() { return {FamilyKind::binomial}; }

    /// b(theta)
    double cumulant(double theta) const noexcept
    {
        if (kind == FamilyKind::gaussian) return 0.5 * theta * theta;
        // log(1 + e^theta) without overflow
        return theta > 0 ? theta + std::log1p(std::exp(-theta)) : std::log1p(std::exp(theta));
    }

    /// b'(theta), the mean function.
    double mean(double theta) const noexcept
    {
        if (kind == FamilyKind::gaussian) return theta;
        if (theta >= 0) return 1.0 / (1.0 + std::exp(-theta));
        const double e = std::exp(theta);
        return e / (1.0 + e);
    }

    /// b''(theta), the variance function.
    double variance(double theta) const noexcept
    {
        if (kind == FamilyKind::gaussian) return 1.0;
        const double mu = mean(theta);
        return mu * (1.0 - mu);
    }

    /// a(phi); fixed at one for both supported families.
    double dispersion() const noexcept { return 1.0; }

    bool operator==(const GlmFamily&) const = default;
};

inline std::string family_name(const GlmFamily& f)
{
    return f.kind == FamilyKind::gaussian ? "gaussian" : "binomial";
}

inline GlmFamily parse_family(const std::string& s)
{
    if (s == "gaussian") return GlmFamily::gaussian();
    if (s == "binomial") return GlmFamily::binomial();
    detail::fail(ErrorCode::invalid_argument, "unknown family '" + s + "'");
}

/// Strictly increasing set of column indices.
class ActiveSet
{
public:
    ActiveSet() = default;

    explicit ActiveSet(std::vector<int> indices) : indices_(std::move(indices))
    {
        for (std::size_t i = 0; i < indices_.size(); ++i) {
            detail::require(indices_[i] >= 0, "active set index must be nonnegative");
            detail::require(i == 0 || indices_[i - 1] < indices_[i],
                            "active set indices must be strictly increasing");
        }
    }

    /// Sorts and removes duplicates before constructing.
    static ActiveSet from_unsorted(std::vector<int> indices)
    {
        std::sort(indices.begin(), indices.end());
        indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
        return ActiveSet(std::move(indices));
    }

    const std::vector<int>& indices() const noexcept { return indices_; }
    int size() const noexcept { return static_cast<int>(indices_.size()); }
    bool empty() const noexcept { return indices_.empty(); }
    int operator[](int i) const { return indices_[static_cast<std::size_t>(i)]; }

    bool contains(int j) const noexcept
    {
        return std::binary_search(indices_.begin(), indices_.end(), j);
    }

    bool operator==(const ActiveSet&) const = default;

private:
    std::vector<int> indices_;
};

/// Coefficient vector stored by support. `values[i]` belongs to `support[i]`.
struct SparseCoef
{
    int p = 0;
    ActiveSet support;
    std::vector<double> values;
    double intercept = 0.0;

    Vector dense() const
    {
        Vector b = Vector::Zero(p);
        for (int i = 0; i < support.size(); ++i) b(support[i]) = values[static_cast<std::size_t>(i)];
        return b;
    }

    static SparseCoef from_dense(const Vector& b, double intercept = 0.0)
    {
        SparseCoef c;
        c.p = static_cast<int>(b.size());
        std::vector<int> idx;
        for (int j = 0; j < c.p; ++j) {
            if (b(j) != 0.0) {
                idx.push_back(j);
                c.values.push_back(b(j));
            }
        }
        c.support = ActiveSet(std::move(idx));
        c.intercept = intercept;
        return c;
    }
};

struct Dataset
{
    Matrix X;
    Vector y;
    GlmFamily family;
    std::vector<std::string> column_names;
    bool standardized = false;

    int n() const noexcept { return static_cast<int>(X.rows()); }
    int p() const noexcept { return static_cast<int>(X.cols()); }

    void validate() const
    {
        detail::require(X.rows() >= 2, "dataset needs at least 2 observations");
        detail::require(X.cols() >= 1, "dataset needs at least 1 column");
        detail::require(y.size() == X.rows(), "response length does not match design rows");
        detail::require(column_names.empty() || column_names.size() == static_cast<std::size_t>(X.cols()),
                        "column_names length does not match design columns");
        detail::require(X.allFinite() && y.allFinite(), "dataset contains non-finite values");
        if (family.kind == FamilyKind::binomial) {
            for (int i = 0; i < y.size(); ++i) {
                detail::require(y(i) == 0.0 || y(i) == 1.0, "binomial response must be 0 or 1");
            }
        }
    }
};

/// Copy of the given rows, in the order listed.
inline Dataset subset_rows(const Dataset& data, std::span<const int> rows)
{
    Dataset out;
    out.family = data.family;
    out.column_names = data.column_names;
    out.X.resize(static_cast<Eigen::Index>(rows.size()), data.X.cols());
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.X.row(static_cast<Eigen::Index>(i)) = data.X.row(rows[i]);
        out.y(static_cast<Eigen::Index>(i)) = data.y(rows[i]);
    }
    return out;
}

/// Centers and scales every column to sample mean 0 and sample sd 1.
inline Dataset standardize(const Dataset& data)
{
    Dataset out = data;
    const double n = data.n();
    for (int j = 0; j < data.p(); ++j) {
        auto col = out.X.col(j);
        const double mu = col.mean();
        col.array() -= mu;
        const double sd = std::sqrt(col.squaredNorm() / (n - 1.0));
        detail::require(sd > 0.0, "cannot standardize a constant column");
        col /= sd;
    }
    out.standardized = true;
    return out;
}

/// (1/m) sum_i [-y_i theta_i + b(theta_i)]
inline double neg_log_lik(const GlmFamily& family, const Eigen::Ref<const Vector>& theta,
                          const Eigen::Ref<const Vector>& y)
{
    detail::require(theta.size() == y.size(), "neg_log_lik: theta and y lengths differ");
    detail::require(theta.size() >= 1, "neg_log_lik: empty input");
    detail::require(theta.allFinite() && y.allFinite(), "neg_log_lik: non-finite input");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        sum += -y(i) * theta(i) + family.cumulant(theta(i));
    }
    return sum / static_cast<double>(theta.size());
}

enum class LossMetric { pe, ce, nll };

/// Linear predictor intercept + X beta.
inline Vector linear_predictor(const Matrix& X, const Vector& beta, double intercept = 0.0)
{
    Vector eta = X * beta;
    if (intercept != 0.0) eta.array() += intercept;
    return eta;
}

/**
 * Test-set loss of a coefficient vector.
 *  pe  : mean squared error of y against x'beta
 *  ce  : misclassification rate of 1{mean(x'beta) > 0.5} (ties go to 0)
 *  nll : neg_log_lik at theta = x'beta
 */
inline double prediction_loss(const GlmFamily& family, const Vector& beta, const Dataset& test,
                              LossMetric metric, double intercept = 0.0)
{
    detail::require(beta.size() == test.p(), "prediction_loss: beta length does not match test.p");
    detail::require(family == test.family, "prediction_loss: family does not match the test set");
    detail::require(!(metric == LossMetric::ce && family.kind != FamilyKind::binomial),
                    "prediction_loss: ce requires the binomial family");
    const Vector eta = linear_predictor(test.X, beta, intercept);
    switch (metric) {
        case LossMetric::pe:
            return (test.y - eta).squaredNorm() / static_cast<double>(test.n());
        case LossMetric::ce: {
            int wrong = 0;
            for (int i = 0; i < test.n(); ++i) {
                const double label = family.mean(eta(i)) > 0.5 ? 1.0 : 0.0;
                if (label != test.y(i)) ++wrong;
            }
            return static_cast<double>(wrong) / static_cast<double>(test.n());
        }
        case LossMetric::nll:
            return neg_log_lik(family, eta, test.y);
    }
    return 0.0;
}

} // namespace pathcv
