#pragma once

// Pairwise structure matrices shared by every statistic: Euclidean distances,
// Gaussian kernels, double centering and the unbiased U-centering transform.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ksample/error.hpp"

namespace ksample {

/// n x p observation matrix; rows are samples, columns are features.
using DataMatrix = Eigen::MatrixXd;

struct DistanceMatrix {
    Eigen::MatrixXd values;
    std::string metric = "euclidean";

    [[nodiscard]] Eigen::Index size() const noexcept { return values.rows(); }
};

struct KernelMatrix {
    Eigen::MatrixXd values;
    double bandwidth = 1.0;

    [[nodiscard]] Eigen::Index size() const noexcept { return values.rows(); }
};

enum class CenterScheme { double_centered, u_centered };

struct CenteredMatrix {
    Eigen::MatrixXd values;
    CenterScheme scheme = CenterScheme::double_centered;

    [[nodiscard]] Eigen::Index size() const noexcept { return values.rows(); }
};

/// Anything carrying an n x n `values` matrix (distances, kernels).
template <class T>
concept PairwiseMatrix = requires(const T& m) {
    { m.values } -> std::convertible_to<const Eigen::MatrixXd&>;
};

/// Gaussian kernel bandwidth: either the median heuristic or a fixed sigma.
class Bandwidth {
public:
    static Bandwidth median() { return Bandwidth{}; }
    static Bandwidth fixed(double sigma) {
        if (!(sigma > 0.0) || !std::isfinite(sigma)) {
            throw InputError("bandwidth must be a positive finite number");
        }
        return Bandwidth{sigma};
    }

    [[nodiscard]] bool is_median() const noexcept { return !sigma_.has_value(); }
    [[nodiscard]] double sigma() const { return sigma_.value(); }

private:
    Bandwidth() = default;
    explicit Bandwidth(double s) : sigma_(s) {}
    std::optional<double> sigma_;
};

inline void require_finite(const Eigen::MatrixXd& x, const char* what = "data matrix") {
    if (x.rows() < 1 || x.cols() < 1) {
        throw InputError(std::string(what) + " must have at least one row and one column");
    }
    if (!x.allFinite()) {
        throw InputError(std::string(what) + " contains non-finite entries");
    }
}

inline void require_square(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) {
        throw InputError("pairwise matrix must be square");
    }
}

inline void require_same_size(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    require_square(a);
    require_square(b);
    if (a.rows() != b.rows()) {
        throw InputError("pairwise matrices have different sample counts");
    }
}

/// Euclidean distances between rows; symmetric with an exact zero diagonal.
inline DistanceMatrix pairwise_distances(const DataMatrix& x) {
    require_finite(x);
    const Eigen::Index n = x.rows();
    // Work on the transpose so each sample is a contiguous column.
    const Eigen::MatrixXd xt = x.transpose();
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < j; ++i) {
            const double v = (xt.col(i) - xt.col(j)).norm();
            d(i, j) = v;
            d(j, i) = v;
        }
    }
    return DistanceMatrix{std::move(d), "euclidean"};
}

/// Median of the strictly positive off-diagonal distances.
inline double median_bandwidth(const DistanceMatrix& d) {
    require_square(d.values);
    const Eigen::Index n = d.size();
    std::vector<double> pos;
    pos.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < j; ++i) {
            if (d.values(i, j) > 0.0) pos.push_back(d.values(i, j));
        }
    }
    if (pos.empty()) {
        throw DegenerateError("median bandwidth undefined: all points coincide");
    }
    const std::size_t mid = pos.size() / 2;
    std::nth_element(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(mid), pos.end());
    double med = pos[mid];
    if (pos.size() % 2 == 0) {
        const double lower =
            *std::max_element(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(mid));
        med = 0.5 * (med + lower);
    }
    return med;
}

/// exp(-d^2 / (2 sigma^2)) applied entrywise to a distance matrix.
inline KernelMatrix gaussian_kernel(const DistanceMatrix& d, double sigma) {
    require_square(d.values);
    if (!(sigma > 0.0)) throw DegenerateError("gaussian kernel bandwidth must be positive");
    const double scale = -1.0 / (2.0 * sigma * sigma);
    Eigen::MatrixXd k = (d.values.array().square() * scale).exp().matrix();
    k.diagonal().setOnes();
    return KernelMatrix{std::move(k), sigma};
}

inline KernelMatrix gaussian_kernel(const DistanceMatrix& d, const Bandwidth& bw) {
    return gaussian_kernel(d, bw.is_median() ? median_bandwidth(d) : bw.sigma());
}

inline KernelMatrix gaussian_kernel(const DataMatrix& x, const Bandwidth& bw) {
    return gaussian_kernel(pairwise_distances(x), bw);
}

/// H M H with H = I - J/n. Only the upper triangle is computed and mirrored.
inline CenteredMatrix double_center(const Eigen::MatrixXd& m) {
    require_square(m);
    const Eigen::Index n = m.rows();
    const Eigen::VectorXd row_mean = m.rowwise().mean();
    const Eigen::VectorXd col_mean = m.colwise().mean().transpose();
    const double grand = m.mean();
    Eigen::MatrixXd c(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i <= j; ++i) {
            const double v = m(i, j) - row_mean(i) - col_mean(j) + grand;
            c(i, j) = v;
            c(j, i) = v;
        }
    }
    return CenteredMatrix{std::move(c), CenterScheme::double_centered};
}

template <PairwiseMatrix M>
CenteredMatrix double_center(const M& m) {
    return double_center(m.values);
}

/// Unbiased (U-)centering: zero diagonal, and for i != j
///   C_ij = M_ij - r_i/(n-2) - c_j/(n-2) + S/((n-1)(n-2))
/// where r, c are row/column sums and S is the total sum.
inline CenteredMatrix u_center(const Eigen::MatrixXd& m) {
    require_square(m);
    const Eigen::Index n = m.rows();
    if (n < 4) throw SampleSizeError("U-centering requires at least 4 samples");
    const double nd = static_cast<double>(n);
    const Eigen::VectorXd row_sum = m.rowwise().sum();
    const Eigen::VectorXd col_sum = m.colwise().sum().transpose();
    const double total = m.sum() / ((nd - 1.0) * (nd - 2.0));
    Eigen::MatrixXd c(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        c(j, j) = 0.0;
        for (Eigen::Index i = 0; i < j; ++i) {
            const double v = m(i, j) - (row_sum(i) + col_sum(j)) / (nd - 2.0) + total;
            c(i, j) = v;
            c(j, i) = v;
        }
    }
    return CenteredMatrix{std::move(c), CenterScheme::u_centered};
}

template <PairwiseMatrix M>
CenteredMatrix u_center(const M& m) {
    return u_center(m.values);
}

/// out(i, j) = m(perm[i], perm[j]); the pairwise matrix of row-permuted data.
inline Eigen::MatrixXd permute_symmetric(const Eigen::MatrixXd& m,
                                         std::span<const std::size_t> perm) {
    const auto n = static_cast<Eigen::Index>(perm.size());
    Eigen::MatrixXd out(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto pj = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(j)]);
        for (Eigen::Index i = 0; i < n; ++i) {
            out(i, j) = m(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]), pj);
        }
    }
    return out;
}

/// Rows of `m` reordered so that row i of the result is row perm[i] of `m`.
inline Eigen::MatrixXd permute_rows(const Eigen::MatrixXd& m, std::span<const std::size_t> perm) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(perm.size()), m.cols());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(perm[i]));
    }
    return out;
}

}  // namespace ksample
