#pragma once

// KMERF: a classification random forest, its leaf-sharing proximity kernel,
// and the unbiased kernel correlation between that kernel and a label kernel.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "ksample/core.hpp"
#include "ksample/error.hpp"
#include "ksample/parallel.hpp"
#include "ksample/stats.hpp"

namespace ksample {

struct ForestConfig {
    std::size_t trees = 500;
    std::size_t bootstrap_size = 0;  // 0 means n
    bool bootstrap = true;           // false: every tree sees all samples once
    std::size_t max_features = 0;    // 0 means floor(sqrt(p)), at least 1
    std::size_t min_leaf = 1;
};

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int32_t leaf_id = -1;
    std::int32_t majority = -1;
};

class DecisionTree {
public:
    std::vector<TreeNode> nodes;
    std::int32_t leaf_count = 0;

    /// Leaf index reached by a sample. Samples with x[f] <= threshold go left.
    [[nodiscard]] std::int32_t leaf(const double* row, Eigen::Index stride) const {
        std::int32_t at = 0;
        while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
            const auto& nd = nodes[static_cast<std::size_t>(at)];
            at = row[nd.feature * stride] <= nd.threshold ? nd.left : nd.right;
        }
        return nodes[static_cast<std::size_t>(at)].leaf_id;
    }

    [[nodiscard]] std::int32_t predict(const double* row, Eigen::Index stride) const {
        std::int32_t at = 0;
        while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
            const auto& nd = nodes[static_cast<std::size_t>(at)];
            at = row[nd.feature * stride] <= nd.threshold ? nd.left : nd.right;
        }
        return nodes[static_cast<std::size_t>(at)].majority;
    }
};

struct Forest {
    std::vector<DecisionTree> trees;
    std::size_t bootstrap_size = 0;
    std::uint64_t seed = 0;

    /// n x m matrix of leaf ids, one column per tree.
    [[nodiscard]] Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic> apply(const DataMatrix& x) const {
        Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic> out(x.rows(), static_cast<Eigen::Index>(trees.size()));
        for (std::size_t t = 0; t < trees.size(); ++t) {
            for (Eigen::Index i = 0; i < x.rows(); ++i) {
                out(i, static_cast<Eigen::Index>(t)) = trees[t].leaf(&x(i, 0), x.rows());
            }
        }
        return out;
    }
};

namespace forest_detail {

struct Builder {
    const DataMatrix& x;
    std::span<const std::int32_t> labels;
    std::int32_t classes;
    std::size_t max_features;
    std::size_t min_leaf;
    std::mt19937_64& rng;
    DecisionTree& tree;

    std::vector<std::size_t> features;
    std::vector<std::int32_t> left_counts;
    std::vector<std::int32_t> total_counts;
    std::vector<std::size_t> scratch;

    std::int32_t majority(std::span<const std::int32_t> counts) const {
        return static_cast<std::int32_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    }

    std::int32_t make_leaf(std::span<const std::int32_t> counts) {
        TreeNode nd;
        nd.leaf_id = tree.leaf_count++;
        nd.majority = majority(counts);
        tree.nodes.push_back(nd);
        return static_cast<std::int32_t>(tree.nodes.size() - 1);
    }

    // Grows the subtree over samples[lo, hi); returns its node index.
    std::int32_t grow(std::vector<std::size_t>& samples, std::size_t lo, std::size_t hi) {
        const std::size_t size = hi - lo;
        std::vector<std::int32_t> counts(static_cast<std::size_t>(classes), 0);
        for (std::size_t i = lo; i < hi; ++i) ++counts[static_cast<std::size_t>(labels[samples[i]])];
        const auto nonzero = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; });
        if (nonzero <= 1 || size < 2 * min_leaf) return make_leaf(counts);

        std::shuffle(features.begin(), features.end(), rng);

        // The best valid split is taken even without an impurity decrease, so
        // trees keep growing until leaves are pure or no feature varies.
        double best_score = std::numeric_limits<double>::infinity();
        std::int64_t best_feature = -1;
        double best_threshold = 0.0;
        std::size_t tried_informative = 0;
        for (std::size_t f_idx = 0; f_idx < features.size(); ++f_idx) {
            // Draw features until max_features non-constant ones have been examined.
            if (tried_informative >= max_features) break;
            const auto f = static_cast<Eigen::Index>(features[f_idx]);
            scratch.assign(samples.begin() + static_cast<std::ptrdiff_t>(lo),
                           samples.begin() + static_cast<std::ptrdiff_t>(hi));
            std::sort(scratch.begin(), scratch.end(), [&](std::size_t a, std::size_t b) {
                const double va = x(static_cast<Eigen::Index>(a), f);
                const double vb = x(static_cast<Eigen::Index>(b), f);
                return va < vb || (va == vb && a < b);
            });
            if (x(static_cast<Eigen::Index>(scratch.front()), f) == x(static_cast<Eigen::Index>(scratch.back()), f)) {
                continue;
            }
            ++tried_informative;
            std::fill(left_counts.begin(), left_counts.end(), 0);
            total_counts = counts;
            double left_sq = 0.0;
            double right_sq = 0.0;
            for (auto c : total_counts) right_sq += static_cast<double>(c) * static_cast<double>(c);
            for (std::size_t s = 0; s + 1 < size; ++s) {
                const auto cls = static_cast<std::size_t>(labels[scratch[s]]);
                // Move one sample from right to left, updating the squared counts.
                left_sq += 2.0 * left_counts[cls] + 1.0;
                right_sq -= 2.0 * total_counts[cls] - 1.0;
                ++left_counts[cls];
                --total_counts[cls];
                const std::size_t nl = s + 1;
                const std::size_t nr = size - nl;
                if (nl < min_leaf || nr < min_leaf) continue;
                const double v = x(static_cast<Eigen::Index>(scratch[s]), f);
                const double v_next = x(static_cast<Eigen::Index>(scratch[s + 1]), f);
                if (v == v_next) continue;
                const double score = (static_cast<double>(nl) - left_sq / static_cast<double>(nl)) +
                                     (static_cast<double>(nr) - right_sq / static_cast<double>(nr));
                if (score < best_score - 1e-12) {
                    best_score = score;
                    best_feature = f;
                    best_threshold = v + 0.5 * (v_next - v);
                    if (!(best_threshold < v_next)) best_threshold = v;
                }
            }
        }
        if (best_feature < 0) return make_leaf(counts);

        const auto mid_it = std::partition(
            samples.begin() + static_cast<std::ptrdiff_t>(lo), samples.begin() + static_cast<std::ptrdiff_t>(hi),
            [&](std::size_t s) { return x(static_cast<Eigen::Index>(s), best_feature) <= best_threshold; });
        const auto mid = static_cast<std::size_t>(mid_it - samples.begin());

        const auto at = static_cast<std::int32_t>(tree.nodes.size());
        TreeNode split;
        split.feature = static_cast<std::int32_t>(best_feature);
        split.threshold = best_threshold;
        split.majority = majority(counts);
        tree.nodes.push_back(split);
        const std::int32_t left = grow(samples, lo, mid);
        const std::int32_t right = grow(samples, mid, hi);
        tree.nodes[static_cast<std::size_t>(at)].left = left;
        tree.nodes[static_cast<std::size_t>(at)].right = right;
        return at;
    }
};

inline std::vector<std::int32_t> dense_labels(std::span<const std::int32_t> labels, std::int32_t& classes) {
    std::vector<std::int32_t> uniq(labels.begin(), labels.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    classes = static_cast<std::int32_t>(uniq.size());
    std::vector<std::int32_t> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out[i] = static_cast<std::int32_t>(std::lower_bound(uniq.begin(), uniq.end(), labels[i]) - uniq.begin());
    }
    return out;
}

}  // namespace forest_detail

/// Grows one CART classification tree per forest member on an independent
/// bootstrap sample; tree w draws from a stream seeded by (seed, w).
inline Forest train_forest(const DataMatrix& x, std::span<const std::int32_t> labels, const ForestConfig& cfg,
                           std::uint64_t seed) {
    require_finite(x);
    const auto n = static_cast<std::size_t>(x.rows());
    if (labels.size() != n) throw InputError("label count does not match the sample count");
    if (cfg.trees < 1) throw InputError("forest needs at least one tree");
    std::int32_t classes = 0;
    const auto dense = forest_detail::dense_labels(labels, classes);
    if (classes < 2) throw InputError("forest labels must take at least two values");
    const std::size_t nb = cfg.bootstrap_size == 0 ? n : cfg.bootstrap_size;
    if (nb > n) throw InputError("bootstrap size exceeds the sample count");
    const auto p = static_cast<std::size_t>(x.cols());
    const std::size_t mtry = cfg.max_features == 0
                                 ? std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(p))))
                                 : std::min(cfg.max_features, p);

    Forest forest;
    forest.trees.resize(cfg.trees);
    forest.bootstrap_size = nb;
    forest.seed = seed;
    parallel_for(cfg.trees, [&](std::size_t w) {
        std::mt19937_64 rng(derive_seed(seed, w));
        std::vector<std::size_t> samples(nb);
        if (cfg.bootstrap) {
            std::uniform_int_distribution<std::size_t> pick(0, n - 1);
            for (auto& s : samples) s = pick(rng);
        } else {
            std::iota(samples.begin(), samples.end(), std::size_t{0});
        }
        DecisionTree& tree = forest.trees[w];
        tree.nodes.reserve(2 * nb);
        forest_detail::Builder b{x, dense, classes, mtry, std::max<std::size_t>(1, cfg.min_leaf), rng, tree,
                                 {}, std::vector<std::int32_t>(static_cast<std::size_t>(classes)), {}, {}};
        b.features.resize(p);
        std::iota(b.features.begin(), b.features.end(), std::size_t{0});
        b.grow(samples, 0, nb);
    });
    return forest;
}

/// K(i, j) = fraction of trees that put samples i and j in the same leaf.
inline KernelMatrix proximity_kernel(const Forest& forest, const DataMatrix& x) {
    const auto leaves = forest.apply(x);
    const Eigen::Index n = x.rows();
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
    std::vector<std::vector<Eigen::Index>> members;
    for (std::size_t t = 0; t < forest.trees.size(); ++t) {
        members.assign(static_cast<std::size_t>(forest.trees[t].leaf_count), {});
        for (Eigen::Index i = 0; i < n; ++i) {
            members[static_cast<std::size_t>(leaves(i, static_cast<Eigen::Index>(t)))].push_back(i);
        }
        for (const auto& leaf : members) {
            for (std::size_t a = 0; a < leaf.size(); ++a) {
                for (std::size_t b = 0; b < a; ++b) k(leaf[a], leaf[b]) += 1.0;
            }
        }
    }
    const double m = static_cast<double>(forest.trees.size());
    for (Eigen::Index j = 0; j < n; ++j) {
        k(j, j) = 1.0;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            k(i, j) /= m;
            k(j, i) = k(i, j);
        }
    }
    return KernelMatrix{std::move(k), 0.0};
}

/// Distance-induced kernel max(D) - D.
inline KernelMatrix induced_kernel(const DistanceMatrix& d) {
    return KernelMatrix{(d.values.maxCoeff() - d.values.array()).matrix(), 0.0};
}

/// trace(L^x L^y) / (n (n - 3)) with L the U-centered proximity kernel of a
/// forest trained on (x, labels) and the induced kernel of the label encoding.
inline StatisticValue kmerf_statistic(const DataMatrix& x, const Eigen::MatrixXd& label_encoding,
                                      std::span<const std::int32_t> labels, const ForestConfig& cfg,
                                      std::uint64_t seed) {
    if (x.rows() < 4) throw SampleSizeError("KMERF requires at least 4 samples");
    const auto forest = train_forest(x, labels, cfg, seed);
    const auto lx = u_center(proximity_kernel(forest, x));
    const auto ly = u_center(induced_kernel(pairwise_distances(label_encoding)));
    return {detail::centered_cov(lx.values, ly.values, Variant::unbiased), "kmerf",
            static_cast<std::size_t>(x.rows())};
}

}  // namespace ksample
