#pragma once

// Parametric baselines: two-sample Hotelling T^2 and one-way MANOVA with the
// Pillai-Bartlett trace. Covariances are the usual mean-centered ones.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ksample/core.hpp"
#include "ksample/encoding.hpp"
#include "ksample/error.hpp"
#include "ksample/stats.hpp"

namespace ksample {

/// Matrices whose condition number exceeds this are treated as singular.
inline constexpr double kMaxConditionNumber = 1e12;

struct CovarianceSummary {
    Eigen::MatrixXd within;   // W: pooled within-group scatter
    Eigen::MatrixXd between;  // B: group-size weighted scatter of the group means
    Eigen::MatrixXd pooled;   // W / (n - k)
};

namespace classical_detail {

inline void require_well_conditioned(const Eigen::MatrixXd& m, const char* what) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > kMaxConditionNumber) {
        throw SingularityError(std::string(what) + " is singular or ill-conditioned");
    }
}

inline Eigen::MatrixXd scatter(const DataMatrix& g) {
    const Eigen::MatrixXd centered = g.rowwise() - g.colwise().mean();
    return centered.transpose() * centered;
}

}  // namespace classical_detail

inline CovarianceSummary covariance_summary(const KSampleData& data) {
    data.validate();
    const Eigen::Index p = data.p();
    const double n = static_cast<double>(data.total());
    const double k = static_cast<double>(data.k());
    Eigen::RowVectorXd grand = Eigen::RowVectorXd::Zero(p);
    for (const auto& g : data.groups) grand += g.colwise().sum();
    grand /= n;
    CovarianceSummary s{Eigen::MatrixXd::Zero(p, p), Eigen::MatrixXd::Zero(p, p), {}};
    for (const auto& g : data.groups) {
        s.within += classical_detail::scatter(g);
        const Eigen::RowVectorXd diff = g.colwise().mean() - grand;
        s.between += static_cast<double>(g.rows()) * diff.transpose() * diff;
    }
    s.pooled = n > k ? Eigen::MatrixXd(s.within / (n - k)) : Eigen::MatrixXd::Zero(p, p);
    return s;
}

/// (n m / (n + m)) (u_bar - v_bar)^T S^-1 (u_bar - v_bar), S the pooled covariance.
inline StatisticValue hotelling_t2(const DataMatrix& u, const DataMatrix& v) {
    const KSampleData data({u, v});
    const double n = static_cast<double>(u.rows());
    const double m = static_cast<double>(v.rows());
    if (n + m - 2.0 < 1.0) throw SampleSizeError("Hotelling T^2 needs at least 3 samples in total");
    const auto summary = covariance_summary(data);
    classical_detail::require_well_conditioned(summary.pooled, "pooled covariance");
    const Eigen::VectorXd diff = (u.colwise().mean() - v.colwise().mean()).transpose();
    const double quad = diff.dot(summary.pooled.ldlt().solve(diff));
    return {n * m / (n + m) * quad, "hotelling", data.total()};
}

/// trace(B (B + W)^-1), evaluated as trace((B + W)^-1 B) by a linear solve.
/// LDLT rather than LLT: no square roots, so small integer fixtures come out exact.
inline StatisticValue manova_pillai(const KSampleData& data) {
    const auto s = covariance_summary(data);
    const Eigen::MatrixXd total = s.between + s.within;
    classical_detail::require_well_conditioned(total, "B + W");
    const Eigen::MatrixXd solved = total.ldlt().solve(s.between);
    return {solved.trace(), "manova_pillai", data.total()};
}

/// sum lambda_i / (1 + lambda_i) over the eigenvalues of W^-1 B.
inline double pillai_from_eigenvalues(const KSampleData& data) {
    const auto s = covariance_summary(data);
    classical_detail::require_well_conditioned(s.within, "W");
    const Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(s.between, s.within,
                                                                       Eigen::EigenvaluesOnly);
    double total = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double lambda = es.eigenvalues()(i);
        total += lambda / (1.0 + lambda);
    }
    return total;
}

/// Pillai trace under label permutations. The total scatter B + W does not
/// depend on the labels, so it is factored once and each replicate only
/// recomputes the group means: trace(T^-1 B) = sum_s n_s d_s^T T^-1 d_s.
class PillaiPermuted {
public:
    PillaiPermuted(const DataMatrix& x, std::span<const std::size_t> groups, std::size_t k)
        : groups_(groups.begin(), groups.end()), k_(k) {
        const Eigen::RowVectorXd mean = x.colwise().mean();
        centered_ = x.rowwise() - mean;
        const Eigen::MatrixXd total = centered_.transpose() * centered_;
        classical_detail::require_well_conditioned(total, "B + W");
        ldlt_.compute(total);
    }

    [[nodiscard]] double operator()(std::span<const std::size_t> perm) const {
        const Eigen::Index p = centered_.cols();
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k_), p);
        std::vector<double> counts(k_, 0.0);
        for (std::size_t i = 0; i < groups_.size(); ++i) {
            const std::size_t g = groups_[perm[i]];
            sums.row(static_cast<Eigen::Index>(g)) += centered_.row(static_cast<Eigen::Index>(i));
            counts[g] += 1.0;
        }
        double total = 0.0;
        for (std::size_t g = 0; g < k_; ++g) {
            if (counts[g] == 0.0) continue;
            // n_s d_s^T T^-1 d_s with d_s = sum_s / n_s
            const Eigen::VectorXd s = sums.row(static_cast<Eigen::Index>(g)).transpose();
            total += s.dot(ldlt_.solve(s)) / counts[g];
        }
        return total;
    }

private:
    std::vector<std::size_t> groups_;
    std::size_t k_;
    Eigen::MatrixXd centered_;
    Eigen::LDLT<Eigen::MatrixXd> ldlt_;
};

}  // namespace ksample
