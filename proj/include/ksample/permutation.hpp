#pragma once

// Monte-Carlo permutation p-values. Only the label side is permuted; replicate
// r draws its permutation from a substream seeded by (seed, r), so serial and
// parallel runs produce identical results.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "ksample/core.hpp"
#include "ksample/encoding.hpp"
#include "ksample/error.hpp"
#include "ksample/parallel.hpp"

namespace ksample {

enum class PermutationMode { plain, block };

struct PermutationPlan {
    std::size_t n = 0;
    std::size_t replicates = 1000;
    std::uint64_t seed = 0;
    std::optional<BlockStructure> blocks;

    static PermutationPlan plain(std::size_t n, std::size_t replicates, std::uint64_t seed) {
        PermutationPlan p{n, replicates, seed, std::nullopt};
        p.validate();
        return p;
    }

    static PermutationPlan block(BlockStructure b, std::size_t replicates, std::uint64_t seed) {
        const std::size_t n = b.block_ids.size();
        PermutationPlan p{n, replicates, seed, std::move(b)};
        p.validate();
        return p;
    }

    [[nodiscard]] PermutationMode mode() const noexcept {
        return blocks ? PermutationMode::block : PermutationMode::plain;
    }

    void validate() const {
        if (n == 0) throw InputError("permutation plan needs at least one sample");
        if (replicates < 1) throw InputError("permutation plan needs at least one replicate");
        if (!blocks) return;
        const auto& ids = blocks->block_ids;
        const std::size_t bs = blocks->block_size;
        if (ids.size() != n) throw InputError("block structure does not cover every sample");
        if (bs == 0 || n % bs != 0) throw InputError("block permutation requires equal block sizes");
        for (std::size_t start = 0; start < n; start += bs) {
            for (std::size_t i = start; i < start + bs; ++i) {
                if (ids[i] != ids[start]) throw InputError("block permutation requires equal block sizes");
            }
            if (start > 0 && ids[start] == ids[start - 1]) {
                throw InputError("block permutation requires equal block sizes");
            }
        }
    }
};

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t replicates = 0;
    std::uint64_t seed = 0;
    std::vector<double> null_replicates;
};

/// Permutation used by replicate r: row i of the permuted labels is row
/// perm[i] of the originals. Block mode moves whole blocks between block
/// positions and keeps each block's internal order.
inline std::vector<std::size_t> permute_labels(const PermutationPlan& plan, std::size_t r) {
    std::mt19937_64 rng(derive_seed(plan.seed, r));
    std::vector<std::size_t> perm(plan.n);
    if (!plan.blocks) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        return perm;
    }
    const std::size_t bs = plan.blocks->block_size;
    std::vector<std::size_t> order(plan.n / bs);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < order.size(); ++b) {
        for (std::size_t t = 0; t < bs; ++t) perm[b * bs + t] = order[b] * bs + t;
    }
    return perm;
}

/// A null replicate counts toward the p-value when it is at least the observed
/// value, up to a relative tolerance that absorbs rounding in exact ties.
inline bool at_least(double null_value, double observed) noexcept {
    constexpr double kRelTieTolerance = 1e-12;
    return null_value >= observed - kRelTieTolerance * std::abs(observed);
}

/// Runs a permutation test for a statistic expressed as a function of the
/// label permutation. `stat(identity)` must be the observed statistic.
template <class F>
TestResult run_permutation_test(F&& stat, const PermutationPlan& plan, bool keep_null = false) {
    plan.validate();
    std::vector<std::size_t> identity(plan.n);
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    TestResult result;
    result.statistic = stat(std::span<const std::size_t>(identity));
    result.replicates = plan.replicates;
    result.seed = plan.seed;

    std::vector<double> null(plan.replicates);
    parallel_for(plan.replicates, [&](std::size_t r) {
        const auto perm = permute_labels(plan, r);
        null[r] = stat(std::span<const std::size_t>(perm));
    });
    const auto count = static_cast<double>(
        std::count_if(null.begin(), null.end(), [&](double t) { return at_least(t, result.statistic); }));
    result.p_value = (1.0 + count) / (1.0 + static_cast<double>(plan.replicates));
    if (keep_null) result.null_replicates = std::move(null);
    return result;
}

/// Generic form: `stat(x, y_permuted)` evaluated with the rows of y permuted.
template <class Stat>
TestResult perm_test(Stat&& stat, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                     const PermutationPlan& plan, bool keep_null = false) {
    if (static_cast<std::size_t>(y.rows()) != plan.n || x.rows() != y.rows()) {
        throw InputError("permutation plan size does not match the data");
    }
    return run_permutation_test(
        [&](std::span<const std::size_t> perm) { return static_cast<double>(stat(x, permute_rows(y, perm))); },
        plan, keep_null);
}

}  // namespace ksample
