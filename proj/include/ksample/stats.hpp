#pragma once

// Distance and kernel statistics: biased/unbiased Dcov and Dcorr, HSIC,
// two-sample Energy, MMD and the k-sample DISCO energy, plus exact residual
// checks for the identities linking the independence and k-sample forms.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ksample/core.hpp"
#include "ksample/encoding.hpp"
#include "ksample/error.hpp"

namespace ksample {

struct StatisticValue {
    double value = 0.0;
    std::string name;
    std::size_t n = 0;
};

enum class Variant { biased, unbiased };

namespace detail {

inline double frobenius_dot(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a.array() * b.array()).sum();
}

inline double centered_cov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Variant v) {
    const double n = static_cast<double>(a.rows());
    const double norm = v == Variant::biased ? n * n : n * (n - 3.0);
    return frobenius_dot(a, b) / norm;
}

inline CenteredMatrix center(const Eigen::MatrixXd& m, Variant v) {
    return v == Variant::biased ? double_center(m) : u_center(m);
}

inline double normalize(double cov, double self_x, double self_y) {
    const double denom = self_x * self_y;
    if (!(denom > 0.0)) {
        throw DegenerateError("zero self-covariance: one of the samples is constant");
    }
    return cov / std::sqrt(denom);
}

inline double pairwise_cov(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, Variant v) {
    require_same_size(x, y);
    if (v == Variant::unbiased && x.rows() < 4) {
        throw SampleSizeError("unbiased statistics require at least 4 samples");
    }
    return centered_cov(center(x, v).values, center(y, v).values, v);
}

inline double pairwise_corr(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, Variant v) {
    require_same_size(x, y);
    if (v == Variant::unbiased && x.rows() < 4) {
        throw SampleSizeError("unbiased statistics require at least 4 samples");
    }
    const auto cx = center(x, v);
    const auto cy = center(y, v);
    return normalize(centered_cov(cx.values, cy.values, v), centered_cov(cx.values, cx.values, v),
                     centered_cov(cy.values, cy.values, v));
}

}  // namespace detail

/// Sums of a pairwise matrix over every ordered (i, j) with i in group s and
/// j in group t, diagonal included. `m` is assumed symmetric. Pairs are visited
/// in index order so equal partitions give bit-identical sums.
inline Eigen::MatrixXd group_pair_sums(const Eigen::MatrixXd& m, std::span<const std::size_t> groups,
                                       std::size_t k) {
    const auto n = static_cast<Eigen::Index>(groups.size());
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto gj = static_cast<Eigen::Index>(groups[static_cast<std::size_t>(j)]);
        s(gj, gj) += m(j, j);
        for (Eigen::Index i = 0; i < j; ++i) {
            const auto gi = static_cast<Eigen::Index>(groups[static_cast<std::size_t>(i)]);
            const double v = m(i, j);
            s(gi, gj) += v;
            s(gj, gi) += v;
        }
    }
    return s;
}

/// Matrix of pairwise two-sample energies E(s, t) from pooled pairwise values.
inline Eigen::MatrixXd pairwise_energies(const Eigen::MatrixXd& m, std::span<const std::size_t> groups,
                                         std::span<const std::size_t> sizes) {
    const std::size_t k = sizes.size();
    const Eigen::MatrixXd s = group_pair_sums(m, groups, k);
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
            const double na = static_cast<double>(sizes[a]);
            const double nb = static_cast<double>(sizes[b]);
            const auto ia = static_cast<Eigen::Index>(a);
            const auto ib = static_cast<Eigen::Index>(b);
            const double v = 2.0 * s(ia, ib) / (na * nb) - s(ia, ia) / (na * na) - s(ib, ib) / (nb * nb);
            e(ia, ib) = v;
            e(ib, ia) = v;
        }
    }
    return e;
}

/// k-sample DISCO energy: sum over pairs of (n_s n_t / 2n) E(s, t).
inline double disco_from_pairwise(const Eigen::MatrixXd& m, std::span<const std::size_t> groups,
                                  std::span<const std::size_t> sizes) {
    const Eigen::MatrixXd e = pairwise_energies(m, groups, sizes);
    double n = 0.0;
    for (auto s : sizes) n += static_cast<double>(s);
    double total = 0.0;
    for (std::size_t a = 0; a < sizes.size(); ++a) {
        for (std::size_t b = a + 1; b < sizes.size(); ++b) {
            total += static_cast<double>(sizes[a]) * static_cast<double>(sizes[b]) / (2.0 * n) *
                     e(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        }
    }
    return total;
}

template <PairwiseMatrix A, PairwiseMatrix B>
StatisticValue dcov_biased(const A& dx, const B& dy) {
    return {detail::pairwise_cov(dx.values, dy.values, Variant::biased), "dcov_biased",
            static_cast<std::size_t>(dx.values.rows())};
}

template <PairwiseMatrix A, PairwiseMatrix B>
StatisticValue dcorr_biased(const A& dx, const B& dy) {
    return {detail::pairwise_corr(dx.values, dy.values, Variant::biased), "dcorr_biased",
            static_cast<std::size_t>(dx.values.rows())};
}

template <PairwiseMatrix A, PairwiseMatrix B>
StatisticValue dcov_unbiased(const A& dx, const B& dy) {
    return {detail::pairwise_cov(dx.values, dy.values, Variant::unbiased), "dcov_unbiased",
            static_cast<std::size_t>(dx.values.rows())};
}

template <PairwiseMatrix A, PairwiseMatrix B>
StatisticValue dcorr_unbiased(const A& dx, const B& dy) {
    return {detail::pairwise_corr(dx.values, dy.values, Variant::unbiased), "dcorr_unbiased",
            static_cast<std::size_t>(dx.values.rows())};
}

/// HSIC in covariance form: the Dcov formulas applied to kernel matrices.
inline StatisticValue hsic(const KernelMatrix& kx, const KernelMatrix& ky, Variant v) {
    return {detail::pairwise_cov(kx.values, ky.values, v),
            v == Variant::biased ? "hsic_biased" : "hsic_unbiased",
            static_cast<std::size_t>(kx.values.rows())};
}

/// Normalized HSIC (kernel correlation).
inline StatisticValue hsic_corr(const KernelMatrix& kx, const KernelMatrix& ky, Variant v) {
    return {detail::pairwise_corr(kx.values, ky.values, v),
            v == Variant::biased ? "hsic_corr_biased" : "hsic_corr_unbiased",
            static_cast<std::size_t>(kx.values.rows())};
}

inline StatisticValue energy_two_sample(const DataMatrix& u, const DataMatrix& v) {
    const KSampleData data({u, v});
    const auto sizes = data.sizes();
    const auto groups = group_index(sizes);
    const auto d = pairwise_distances(concat_groups(data));
    const Eigen::MatrixXd e = pairwise_energies(d.values, groups, sizes);
    return {e(0, 1), "energy", data.total()};
}

/// Biased MMD^2 with a Gaussian kernel; the bandwidth is fixed once on the pooled sample.
inline StatisticValue mmd(const DataMatrix& u, const DataMatrix& v, const Bandwidth& bw) {
    const KSampleData data({u, v});
    const auto sizes = data.sizes();
    const auto groups = group_index(sizes);
    const auto k = gaussian_kernel(concat_groups(data), bw);
    const Eigen::MatrixXd e = pairwise_energies(k.values, groups, sizes);
    return {-e(0, 1), "mmd", data.total()};
}

inline StatisticValue disco_energy(const KSampleData& data) {
    data.validate();
    const auto sizes = data.sizes();
    const auto groups = group_index(sizes);
    const auto d = pairwise_distances(concat_groups(data));
    return {disco_from_pairwise(d.values, groups, sizes), "disco_energy", data.total()};
}

/// Outcome of an exact identity check: |lhs - rhs| against 1e-9 * max(1, |lhs|).
struct IdentityCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;
    double tolerance = 0.0;

    [[nodiscard]] bool holds() const noexcept { return residual < tolerance; }
};

inline constexpr double kIdentityTolerance = 1e-9;

inline IdentityCheck make_check(double lhs, double rhs) {
    return {lhs, rhs, std::abs(lhs - rhs), kIdentityTolerance * std::max(1.0, std::abs(lhs))};
}

namespace detail {

struct TwoSampleSetup {
    std::vector<std::size_t> sizes;
    std::vector<std::size_t> groups;
    DataMatrix x;
    LabelEncoding labels;
    double n1 = 0, n2 = 0, n = 0;
    double scale = 0;  // 2 n1^2 n2^2 / n^4
};

inline TwoSampleSetup two_sample_setup(const DataMatrix& u, const DataMatrix& v) {
    const KSampleData data({u, v});
    TwoSampleSetup s;
    s.sizes = data.sizes();
    s.groups = group_index(s.sizes);
    s.x = concat_groups(data);
    s.labels = one_way_labels(s.sizes);
    s.n1 = static_cast<double>(s.sizes[0]);
    s.n2 = static_cast<double>(s.sizes[1]);
    s.n = s.n1 + s.n2;
    s.scale = 2.0 * s.n1 * s.n1 * s.n2 * s.n2 / std::pow(s.n, 4);
    return s;
}

}  // namespace detail

/// Biased Dcov on the 0/1 encoding vs. (2 n1^2 n2^2 beta / n^4) Energy.
inline IdentityCheck check_dcov_energy(const DataMatrix& u, const DataMatrix& v) {
    const auto s = detail::two_sample_setup(u, v);
    const auto dx = pairwise_distances(s.x);
    const auto dy = pairwise_distances(s.labels.y);
    const Eigen::Index last = dy.size() - 1;
    const double beta = dy.values(0, last) - dy.values(0, 0);
    const double lhs = dcov_biased(dx, dy).value;
    const double energy = pairwise_energies(dx.values, s.groups, s.sizes)(0, 1);
    return make_check(lhs, s.scale * beta * energy);
}

/// Biased HSIC on the 0/1 encoding vs. the scaled MMD, with the same Gaussian
/// kernel on data and labels. Energy evaluated on kernel values equals -MMD, so
/// the right-hand side is scale * beta * (-MMD) with beta = k(0,1) - k(0,0) < 0.
inline IdentityCheck check_hsic_mmd(const DataMatrix& u, const DataMatrix& v, double sigma = 1.0) {
    const auto s = detail::two_sample_setup(u, v);
    const auto kx = gaussian_kernel(pairwise_distances(s.x), sigma);
    const auto ky = gaussian_kernel(pairwise_distances(s.labels.y), sigma);
    const Eigen::Index last = ky.size() - 1;
    const double beta = ky.values(0, last) - ky.values(0, 0);
    const double lhs = hsic(kx, ky, Variant::biased).value;
    const double mmd_value = mmd(u, v, Bandwidth::fixed(sigma)).value;
    return make_check(lhs, s.scale * beta * (-mmd_value));
}

struct DiscoIdentityCheck {
    IdentityCheck weighted;  // Dcov vs. the pairwise-weighted energy sum
    IdentityCheck balanced;  // Dcov vs. (2 beta / (n k)) DISCO
    bool equal_sizes = false;
    double beta = 0.0;
};

inline DiscoIdentityCheck check_dcov_disco(const KSampleData& data) {
    data.validate();
    const auto sizes = data.sizes();
    const auto groups = group_index(sizes);
    const std::size_t k = sizes.size();
    const auto dx = pairwise_distances(concat_groups(data));
    const auto dy = pairwise_distances(one_way_labels(sizes).y);
    // Label-row distance between the first rows of groups 0 and 1.
    const auto first_of_second = static_cast<Eigen::Index>(sizes[0]);
    const double beta = dy.values(0, first_of_second) - dy.values(0, 0);

    const double n = static_cast<double>(data.total());
    double sum_sq = 0.0;
    for (auto s : sizes) sum_sq += static_cast<double>(s) * static_cast<double>(s);

    const Eigen::MatrixXd e = pairwise_energies(dx.values, groups, sizes);
    double weighted = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
            const double na = static_cast<double>(sizes[a]);
            const double nb = static_cast<double>(sizes[b]);
            weighted += (n * (na + nb) - sum_sq) / std::pow(n, 4) * na * nb *
                        e(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        }
    }
    weighted *= beta;

    const double dcov = dcov_biased(dx, dy).value;
    const double disco = disco_from_pairwise(dx.values, groups, sizes);
    DiscoIdentityCheck out;
    out.weighted = make_check(dcov, weighted);
    out.balanced = make_check(dcov, 2.0 * beta / (n * static_cast<double>(k)) * disco);
    out.equal_sizes = std::all_of(sizes.begin(), sizes.end(), [&](auto s) { return s == sizes[0]; });
    out.beta = beta;
    return out;
}

}  // namespace ksample
