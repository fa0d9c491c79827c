#pragma once

// Multiscale graph correlation. Local correlations c(k, l) restrict the
// centered distance products to the k-nearest neighbors in x and the
// l-nearest neighbors in y; the statistic is the maximum of the smoothed map.
//
// Conventions:
//  * centering subtracts each column's off-diagonal mean and zeroes the diagonal;
//  * neighbor ranks are taken along rows, the sample itself is always rank 0,
//    and remaining ties are broken by column index;
//  * smoothing keeps the largest 4-connected region of entries above
//    tau = max(c(n, n), 2 / sqrt(n)) when that region covers at least 2n
//    scales, and otherwise collapses the map to the global value c(n, n).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ksample/core.hpp"
#include "ksample/error.hpp"
#include "ksample/stats.hpp"

namespace ksample {

using RankMatrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic>;

struct NeighborGraph {
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> indicator;
    std::size_t k = 0;
};

/// c(k, l) stored at values(k - 1, l - 1); scales are 1-based.
struct LocalCorrMap {
    Eigen::MatrixXd values;
    std::pair<std::size_t, std::size_t> optimal_scale{0, 0};

    [[nodiscard]] double global() const { return values(values.rows() - 1, values.cols() - 1); }
};

struct MgcResult {
    double statistic = 0.0;
    std::pair<std::size_t, std::size_t> optimal_scale{0, 0};
};

namespace mgc_detail {

/// Neighbor ranks of a (possibly permuted) pairwise matrix. When the matrix
/// takes only a handful of distinct values (label distances) ranks are built
/// by counting instead of sorting.
class RankContext {
public:
    explicit RankContext(const Eigen::MatrixXd& d) : d_(d) {
        std::vector<double> vals(d.data(), d.data() + d.size());
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        if (vals.size() <= kMaxBuckets) {
            levels_ = vals.size();
            bucket_.resize(d.rows(), d.cols());
            for (Eigen::Index j = 0; j < d.cols(); ++j) {
                for (Eigen::Index i = 0; i < d.rows(); ++i) {
                    const auto it = std::lower_bound(vals.begin(), vals.end(), d(i, j));
                    bucket_(i, j) = static_cast<std::uint8_t>(it - vals.begin());
                }
            }
        }
    }

    /// out(i, j) = rank of d(perm[i], perm[j]) within row i.
    void ranks(std::span<const std::size_t> perm, RankMatrix& out) const {
        const auto n = static_cast<Eigen::Index>(perm.size());
        out.resize(n, n);
        if (levels_ > 0) {
            counting_ranks(perm, out);
        } else {
            sorting_ranks(perm, out);
        }
    }

private:
    static constexpr std::size_t kMaxBuckets = 32;

    void sorting_ranks(std::span<const std::size_t> perm, RankMatrix& out) const {
        const auto n = static_cast<Eigen::Index>(perm.size());
        std::vector<std::int32_t> order(static_cast<std::size_t>(n));
        std::vector<double> row(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto pi = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]);
            for (Eigen::Index j = 0; j < n; ++j) {
                row[static_cast<std::size_t>(j)] = d_(pi, static_cast<Eigen::Index>(perm[static_cast<std::size_t>(j)]));
            }
            std::iota(order.begin(), order.end(), 0);
            const auto self = static_cast<std::int32_t>(i);
            std::sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
                if (a == self || b == self) return a == self && b != self;
                const double va = row[static_cast<std::size_t>(a)];
                const double vb = row[static_cast<std::size_t>(b)];
                return va < vb || (va == vb && a < b);
            });
            for (Eigen::Index r = 0; r < n; ++r) out(i, order[static_cast<std::size_t>(r)]) = static_cast<std::int32_t>(r);
        }
    }

    void counting_ranks(std::span<const std::size_t> perm, RankMatrix& out) const {
        const auto n = static_cast<Eigen::Index>(perm.size());
        std::vector<std::int32_t> count(levels_);
        std::vector<std::int32_t> offset(levels_);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto pi = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]);
            std::fill(count.begin(), count.end(), 0);
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) continue;
                ++count[bucket_(pi, static_cast<Eigen::Index>(perm[static_cast<std::size_t>(j)]))];
            }
            std::int32_t acc = 1;  // rank 0 is the sample itself
            for (std::size_t b = 0; b < levels_; ++b) {
                offset[b] = acc;
                acc += count[b];
            }
            out(i, i) = 0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) continue;
                out(i, j) = offset[bucket_(pi, static_cast<Eigen::Index>(perm[static_cast<std::size_t>(j)]))]++;
            }
        }
    }

    const Eigen::MatrixXd& d_;
    std::size_t levels_ = 0;
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> bucket_;
};

/// Column-wise mean-zero modification used by the local correlations.
inline Eigen::MatrixXd column_center(const Eigen::MatrixXd& d) {
    const Eigen::Index n = d.rows();
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double mean = (d.col(j).sum() - d(j, j)) / static_cast<double>(n - 1);
        a.col(j) = d.col(j).array() - mean;
        a(j, j) = 0.0;
    }
    return a;
}

/// Local correlation map from centered matrices and neighbor ranks. The y side
/// is read through `perm`: b(perm[i], perm[j]).
inline Eigen::MatrixXd local_corr(const Eigen::MatrixXd& a, const RankMatrix& rx, const Eigen::MatrixXd& b,
                                  const RankMatrix& ry, std::span<const std::size_t> perm) {
    const Eigen::Index n = a.rows();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd var_x = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd var_y = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto pj = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(j)]);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (i == j) continue;
            const double av = a(i, j);
            const double bv = b(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]), pj);
            const auto kx = rx(i, j);
            const auto ly = ry(i, j);
            cov(kx, ly) += av * bv;
            var_x(kx) += av * av;
            var_y(ly) += bv * bv;
        }
    }
    // Inclusive prefix sums: entry (k-1, l-1) covers ranks < k and < l.
    for (Eigen::Index l = 0; l < n; ++l) {
        for (Eigen::Index k = 1; k < n; ++k) cov(k, l) += cov(k - 1, l);
    }
    for (Eigen::Index l = 1; l < n; ++l) cov.col(l) += cov.col(l - 1);
    for (Eigen::Index k = 1; k < n; ++k) {
        var_x(k) += var_x(k - 1);
        var_y(k) += var_y(k - 1);
    }
    for (Eigen::Index l = 0; l < n; ++l) {
        for (Eigen::Index k = 0; k < n; ++k) {
            const double denom = var_x(k) * var_y(l);
            cov(k, l) = denom > 0.0 ? cov(k, l) / std::sqrt(denom) : 0.0;
        }
    }
    return cov;
}

/// Largest 4-connected region of entries strictly above tau (column-major
/// linear indices). Ties in size keep the region found first.
inline std::vector<Eigen::Index> largest_region(const Eigen::MatrixXd& c, double tau) {
    const Eigen::Index rows = c.rows();
    const Eigen::Index cols = c.cols();
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(c.size()), 0);
    std::vector<Eigen::Index> best;
    std::vector<Eigen::Index> current;
    std::vector<Eigen::Index> stack;
    for (Eigen::Index start = 0; start < c.size(); ++start) {
        if (seen[static_cast<std::size_t>(start)] || !(c.data()[start] > tau)) continue;
        current.clear();
        stack.assign(1, start);
        seen[static_cast<std::size_t>(start)] = 1;
        while (!stack.empty()) {
            const Eigen::Index idx = stack.back();
            stack.pop_back();
            current.push_back(idx);
            const Eigen::Index r = idx % rows;
            const Eigen::Index q = idx / rows;
            const Eigen::Index nbrs[4][2] = {{r - 1, q}, {r + 1, q}, {r, q - 1}, {r, q + 1}};
            for (const auto& nb : nbrs) {
                if (nb[0] < 0 || nb[0] >= rows || nb[1] < 0 || nb[1] >= cols) continue;
                const Eigen::Index ni = nb[1] * rows + nb[0];
                if (seen[static_cast<std::size_t>(ni)] || !(c.data()[ni] > tau)) continue;
                seen[static_cast<std::size_t>(ni)] = 1;
                stack.push_back(ni);
            }
        }
        if (current.size() > best.size()) best = current;
    }
    return best;
}

inline double threshold(const Eigen::MatrixXd& c) {
    const double global = c(c.rows() - 1, c.cols() - 1);
    return std::max(global, 2.0 / std::sqrt(static_cast<double>(c.rows())));
}

inline MgcResult statistic_from_map(const Eigen::MatrixXd& c) {
    const Eigen::Index n = c.rows();
    const double global = c(n - 1, n - 1);
    const auto region = largest_region(c, threshold(c));
    MgcResult out{global, {static_cast<std::size_t>(n), static_cast<std::size_t>(n)}};
    if (static_cast<Eigen::Index>(region.size()) < 2 * n) return out;
    // Every region entry exceeds tau >= c(n, n), so the maximum lies inside it.
    Eigen::Index best = region.front();
    for (auto idx : region) {
        if (c.data()[idx] > c.data()[best] || (c.data()[idx] == c.data()[best] && idx < best)) best = idx;
    }
    out.statistic = c.data()[best];
    out.optimal_scale = {static_cast<std::size_t>(best % n) + 1, static_cast<std::size_t>(best / n) + 1};
    return out;
}

inline std::vector<std::size_t> identity_perm(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    return p;
}

}  // namespace mgc_detail

/// Indicator of the k smallest entries of each row (self first, ties by index).
inline NeighborGraph knn_graph(const DistanceMatrix& d, std::size_t k) {
    require_square(d.values);
    const Eigen::Index n = d.size();
    if (k < 1 || k > static_cast<std::size_t>(n)) throw InputError("neighborhood size out of range");
    RankMatrix ranks;
    mgc_detail::RankContext(d.values).ranks(mgc_detail::identity_perm(static_cast<std::size_t>(n)), ranks);
    NeighborGraph g;
    g.k = k;
    g.indicator = (ranks.array() < static_cast<std::int32_t>(k)).cast<std::uint8_t>();
    return g;
}

inline LocalCorrMap local_corr_map(const DistanceMatrix& dx, const DistanceMatrix& dy) {
    require_same_size(dx.values, dy.values);
    const Eigen::Index n = dx.size();
    if (n < 4) throw SampleSizeError("MGC requires at least 4 samples");
    const auto id = mgc_detail::identity_perm(static_cast<std::size_t>(n));
    RankMatrix rx;
    RankMatrix ry;
    mgc_detail::RankContext(dx.values).ranks(id, rx);
    mgc_detail::RankContext(dy.values).ranks(id, ry);
    LocalCorrMap map;
    map.values = mgc_detail::local_corr(mgc_detail::column_center(dx.values), rx,
                                        mgc_detail::column_center(dy.values), ry, id);
    map.optimal_scale = mgc_detail::statistic_from_map(map.values).optimal_scale;
    return map;
}

/// The smoothed map: entries outside the retained region are replaced by
/// c(n, n); without a qualifying region the whole map becomes c(n, n).
inline Eigen::MatrixXd smooth_local_corr(const Eigen::MatrixXd& c) {
    const Eigen::Index n = c.rows();
    const double global = c(n - 1, n - 1);
    const auto region = mgc_detail::largest_region(c, mgc_detail::threshold(c));
    Eigen::MatrixXd out = Eigen::MatrixXd::Constant(c.rows(), c.cols(), global);
    if (static_cast<Eigen::Index>(region.size()) >= 2 * n) {
        for (auto idx : region) out.data()[idx] = c.data()[idx];
    }
    return out;
}

inline MgcResult mgc_statistic(const DistanceMatrix& dx, const DistanceMatrix& dy) {
    const auto map = local_corr_map(dx, dy);
    return mgc_detail::statistic_from_map(map.values);
}

/// MGC with the x side fixed and y read through a label permutation. Ranks and
/// centering of x are computed once.
class MgcPermuted {
public:
    MgcPermuted(const DistanceMatrix& dx, const DistanceMatrix& dy)
        : dy_(dy.values), y_ranks_(dy_) {
        require_same_size(dx.values, dy.values);
        if (dx.size() < 4) throw SampleSizeError("MGC requires at least 4 samples");
        a_ = mgc_detail::column_center(dx.values);
        b_ = mgc_detail::column_center(dy_);
        mgc_detail::RankContext(dx.values).ranks(mgc_detail::identity_perm(static_cast<std::size_t>(dx.size())), rx_);
    }

    MgcPermuted(const MgcPermuted&) = delete;
    MgcPermuted& operator=(const MgcPermuted&) = delete;

    [[nodiscard]] MgcResult operator()(std::span<const std::size_t> perm) const {
        RankMatrix ry;
        y_ranks_.ranks(perm, ry);
        return mgc_detail::statistic_from_map(mgc_detail::local_corr(a_, rx_, b_, ry, perm));
    }

private:
    Eigen::MatrixXd dy_;
    mgc_detail::RankContext y_ranks_;
    Eigen::MatrixXd a_;
    Eigen::MatrixXd b_;
    RankMatrix rx_;
};

}  // namespace ksample
