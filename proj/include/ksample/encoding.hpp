#pragma once

// Turns k group samples into a paired (x, y) problem: x stacks the groups,
// y labels each row with its group (one-hot, 0/1, or a multiway pattern).

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "ksample/core.hpp"
#include "ksample/error.hpp"

namespace ksample {

struct KSampleData {
    std::vector<DataMatrix> groups;

    KSampleData() = default;
    explicit KSampleData(std::vector<DataMatrix> g) : groups(std::move(g)) { validate(); }

    [[nodiscard]] std::size_t k() const noexcept { return groups.size(); }
    [[nodiscard]] Eigen::Index p() const { return groups.empty() ? 0 : groups.front().cols(); }

    [[nodiscard]] std::vector<std::size_t> sizes() const {
        std::vector<std::size_t> s;
        s.reserve(groups.size());
        for (const auto& g : groups) s.push_back(static_cast<std::size_t>(g.rows()));
        return s;
    }

    [[nodiscard]] std::size_t total() const {
        const auto s = sizes();
        return std::accumulate(s.begin(), s.end(), std::size_t{0});
    }

    void validate() const {
        if (groups.size() < 2) throw InputError("k-sample data needs at least two groups");
        const Eigen::Index dim = groups.front().cols();
        for (const auto& g : groups) {
            require_finite(g, "group sample");
            if (g.cols() != dim) throw InputError("groups have different dimensions");
        }
    }
};

struct LabelEncoding {
    Eigen::MatrixXd y;
    std::size_t ways = 1;
    std::vector<std::size_t> sizes;
};

/// Contiguous runs of equally sized blocks (subjects with repeated measurements).
struct BlockStructure {
    std::vector<std::size_t> block_ids;
    std::size_t block_size = 1;

    [[nodiscard]] std::size_t n_blocks() const noexcept {
        return block_size == 0 ? 0 : block_ids.size() / block_size;
    }
};

inline DataMatrix concat_groups(const KSampleData& data) {
    data.validate();
    DataMatrix x(static_cast<Eigen::Index>(data.total()), data.p());
    Eigen::Index row = 0;
    for (const auto& g : data.groups) {
        x.middleRows(row, g.rows()) = g;
        row += g.rows();
    }
    return x;
}

/// Group index (0-based) of every pooled row.
inline std::vector<std::size_t> group_index(std::span<const std::size_t> sizes) {
    std::vector<std::size_t> g;
    for (std::size_t s = 0; s < sizes.size(); ++s) g.insert(g.end(), sizes[s], s);
    return g;
}

/// k = 2: the n x 1 vector of 0s then 1s. k >= 3: the n x k one-hot matrix.
inline LabelEncoding one_way_labels(std::span<const std::size_t> sizes) {
    const std::size_t k = sizes.size();
    if (k < 2) throw InputError("one-way labels need at least two groups");
    for (auto s : sizes) {
        if (s == 0) throw InputError("every group needs at least one sample");
    }
    const auto n = static_cast<Eigen::Index>(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}));
    LabelEncoding enc;
    enc.sizes.assign(sizes.begin(), sizes.end());
    if (k == 2) {
        enc.y = Eigen::MatrixXd::Zero(n, 1);
        enc.y.bottomRows(static_cast<Eigen::Index>(sizes[1])).setOnes();
        return enc;
    }
    enc.y = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(k));
    Eigen::Index row = 0;
    for (std::size_t s = 0; s < k; ++s) {
        const auto ns = static_cast<Eigen::Index>(sizes[s]);
        enc.y.block(row, static_cast<Eigen::Index>(s), ns, 1).setOnes();
        row += ns;
    }
    return enc;
}

inline LabelEncoding one_way_labels(const std::vector<std::size_t>& sizes) {
    return one_way_labels(std::span<const std::size_t>(sizes));
}

/// w-way label matrix: a row of group i carries ones at memberships[i] (0-based
/// column indices into k columns). Every membership set must have exactly w
/// distinct entries with 1 <= w < k, except that w = 1 reduces to one-way.
inline LabelEncoding multiway_labels(std::span<const std::size_t> sizes,
                                     const std::vector<std::vector<std::size_t>>& memberships) {
    const std::size_t k = sizes.size();
    if (k < 2) throw InputError("multiway labels need at least two groups");
    if (memberships.size() != k) throw InputError("one membership set per group is required");
    const std::size_t w = memberships.front().size();
    if (w < 1 || w >= k) throw InputError("multiway tests need 1 <= w < k");
    for (const auto& m : memberships) {
        if (m.size() != w) throw InputError("every membership set must have cardinality w");
        const std::set<std::size_t> uniq(m.begin(), m.end());
        if (uniq.size() != w) throw InputError("membership sets must not repeat a factor");
        if (*uniq.rbegin() >= k) throw InputError("membership index out of range");
    }
    if (w == 1) {
        // Singleton memberships are a relabeled one-way design.
        LabelEncoding enc = one_way_labels(sizes);
        if (k >= 3) {
            Eigen::MatrixXd y = Eigen::MatrixXd::Zero(enc.y.rows(), static_cast<Eigen::Index>(k));
            Eigen::Index row = 0;
            for (std::size_t s = 0; s < k; ++s) {
                const auto ns = static_cast<Eigen::Index>(sizes[s]);
                y.block(row, static_cast<Eigen::Index>(memberships[s][0]), ns, 1).setOnes();
                row += ns;
            }
            enc.y = std::move(y);
        }
        return enc;
    }
    const auto n = static_cast<Eigen::Index>(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}));
    LabelEncoding enc;
    enc.ways = w;
    enc.sizes.assign(sizes.begin(), sizes.end());
    enc.y = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(k));
    Eigen::Index row = 0;
    for (std::size_t s = 0; s < k; ++s) {
        const auto ns = static_cast<Eigen::Index>(sizes[s]);
        for (auto f : memberships[s]) enc.y.block(row, static_cast<Eigen::Index>(f), ns, 1).setOnes();
        row += ns;
    }
    return enc;
}

inline BlockStructure make_blocks(std::size_t n_blocks, std::size_t block_size) {
    if (n_blocks == 0 || block_size == 0) throw InputError("blocks need positive count and size");
    BlockStructure b;
    b.block_size = block_size;
    b.block_ids.reserve(n_blocks * block_size);
    for (std::size_t id = 0; id < n_blocks; ++id) b.block_ids.insert(b.block_ids.end(), block_size, id);
    return b;
}

/// Blocks of `block_size` covering n samples; n must be a multiple of the size.
inline BlockStructure make_blocks_for(std::size_t n, std::size_t block_size) {
    if (block_size == 0 || n % block_size != 0) {
        throw InputError("sample count is not divisible by the block size");
    }
    return make_blocks(n / block_size, block_size);
}

}  // namespace ksample
