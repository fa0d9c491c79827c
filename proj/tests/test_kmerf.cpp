#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "ksample/kmerf.hpp"
#include "ksample/permutation.hpp"
#include "ksample/registry.hpp"
#include "test_util.hpp"

using namespace ksample;

namespace {

// Root split chosen by exhaustive search over every feature and midpoint.
struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = std::numeric_limits<double>::infinity();
};

// Size-weighted Gini impurity of the two children of a split.
double split_score(const DataMatrix& x, const std::vector<std::int32_t>& y, Eigen::Index f, double t) {
    double score = 0.0;
    for (int side = 0; side < 2; ++side) {
        std::map<int, int> counts;
        int size = 0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            if ((x(i, f) <= t) == (side == 0)) {
                ++counts[y[static_cast<std::size_t>(i)]];
                ++size;
            }
        }
        double gini = 1.0;
        for (auto [cls, c] : counts) gini -= (static_cast<double>(c) / size) * (static_cast<double>(c) / size);
        score += size * gini;
    }
    return score;
}

Split exhaustive_root_split(const DataMatrix& x, const std::vector<std::int32_t>& y) {
    Split best;
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
        std::vector<double> values(x.col(f).data(), x.col(f).data() + x.rows());
        std::sort(values.begin(), values.end());
        for (std::size_t s = 0; s + 1 < values.size(); ++s) {
            if (values[s] == values[s + 1]) continue;
            const double t = 0.5 * (values[s] + values[s + 1]);
            const double score = split_score(x, y, f, t);
            if (score < best.score - 1e-12) best = {static_cast<int>(f), t, score};
        }
    }
    return best;
}

// Leaf reached by walking the node array directly.
int walk(const DecisionTree& tree, const DataMatrix& x, Eigen::Index i) {
    std::size_t at = 0;
    while (tree.nodes[at].feature >= 0) {
        const auto& nd = tree.nodes[at];
        at = static_cast<std::size_t>(x(i, nd.feature) <= nd.threshold ? nd.left : nd.right);
    }
    return tree.nodes[at].leaf_id;
}

ForestConfig full_data(std::size_t trees) {
    ForestConfig cfg;
    cfg.trees = trees;
    cfg.bootstrap = false;
    return cfg;
}

}  // namespace

TEST(TrainForest, SeparableOneDimensional) {
    DataMatrix x(8, 1);
    x << 0.1, 0.5, 0.3, 0.9, 2.1, 2.5, 2.2, 3.0;
    const std::vector<std::int32_t> y{0, 0, 0, 0, 1, 1, 1, 1};
    const auto forest = train_forest(x, y, full_data(1), 7);
    ASSERT_EQ(forest.trees.size(), 1u);
    const auto& tree = forest.trees[0];
    for (Eigen::Index i = 0; i < 8; ++i) EXPECT_EQ(tree.predict(&x(i, 0), x.rows()), y[static_cast<std::size_t>(i)]);
    EXPECT_EQ(tree.nodes[0].feature, 0);
    EXPECT_DOUBLE_EQ(tree.nodes[0].threshold, 0.5 * (0.9 + 2.1));
    EXPECT_EQ(tree.leaf_count, 2);
}

TEST(TrainForest, RootSplitMatchesExhaustiveSearch) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const DataMatrix x = test::normal(12, 3, rng);
        std::vector<std::int32_t> y(12);
        for (int i = 0; i < 12; ++i) y[static_cast<std::size_t>(i)] = (x(i, 0) + 0.5 * x(i, 2) + 0.3 * std::sin(7.0 * i)) > 0;
        if (std::count(y.begin(), y.end(), 1) % 12 == 0) continue;
        ForestConfig cfg = full_data(1);
        cfg.max_features = 3;
        const auto tree = train_forest(x, y, cfg, static_cast<std::uint64_t>(trial)).trees[0];
        const auto oracle = exhaustive_root_split(x, y);
        // equal-score splits on different features are equally valid, so compare scores
        EXPECT_NEAR(split_score(x, y, tree.nodes[0].feature, tree.nodes[0].threshold), oracle.score, 1e-12);
    }
}

TEST(TrainForest, TrainingLeavesArePure) {
    std::mt19937_64 rng(2);
    const DataMatrix x = test::normal(40, 4, rng);
    std::vector<std::int32_t> y(40);
    for (int i = 0; i < 40; ++i) y[static_cast<std::size_t>(i)] = (x(i, 0) * x(i, 1) > 0) + (x(i, 3) > 1);
    const auto forest = train_forest(x, y, full_data(5), 3);
    for (const auto& tree : forest.trees)
        for (Eigen::Index i = 0; i < 40; ++i) EXPECT_EQ(tree.predict(&x(i, 0), x.rows()), y[static_cast<std::size_t>(i)]);
}

TEST(TrainForest, Deterministic) {
    std::mt19937_64 rng(3);
    const DataMatrix x = test::normal(30, 3, rng);
    std::vector<std::int32_t> y(30);
    for (int i = 0; i < 30; ++i) y[static_cast<std::size_t>(i)] = i % 3;
    ForestConfig cfg;
    cfg.trees = 20;
    const auto a = train_forest(x, y, cfg, 11).apply(x);
    const auto b = train_forest(x, y, cfg, 11).apply(x);
    const auto c = train_forest(x, y, cfg, 12).apply(x);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    EXPECT_TRUE((a.array() >= 0).all());
}

TEST(TrainForest, Errors) {
    const DataMatrix x = DataMatrix::Zero(4, 1);
    EXPECT_THROW(train_forest(x, std::vector<std::int32_t>{1, 1, 1, 1}, ForestConfig{}, 0), InputError);
    EXPECT_THROW(train_forest(x, std::vector<std::int32_t>{0, 1, 1}, ForestConfig{}, 0), InputError);
    ForestConfig big;
    big.bootstrap_size = 5;
    EXPECT_THROW(train_forest(x, std::vector<std::int32_t>{0, 1, 0, 1}, big, 0), InputError);
}

TEST(ProximityKernel, SingleLeafIsAllOnes) {
    const DataMatrix x = DataMatrix::Constant(5, 2, 3.0);
    const auto forest = train_forest(x, std::vector<std::int32_t>{0, 1, 0, 1, 0}, full_data(1), 0);
    EXPECT_TRUE((proximity_kernel(forest, x).values.array() == 1.0).all());
}

TEST(ProximityKernel, SeparatedClassesNeverShareLeaves) {
    DataMatrix x(6, 1);
    x << 0, 1, 2, 10, 11, 12;
    const auto forest = train_forest(x, std::vector<std::int32_t>{0, 0, 0, 1, 1, 1}, full_data(4), 0);
    const auto k = proximity_kernel(forest, x).values;
    for (int i = 0; i < 3; ++i)
        for (int j = 3; j < 6; ++j) EXPECT_EQ(k(i, j), 0.0);
}

TEST(ProximityKernel, MatchesPerTreeEnumeration) {
    std::mt19937_64 rng(4);
    const DataMatrix x = test::normal(25, 3, rng);
    std::vector<std::int32_t> y(25);
    for (int i = 0; i < 25; ++i) y[static_cast<std::size_t>(i)] = x(i, 1) > 0.2;
    ForestConfig cfg;
    cfg.trees = 15;
    cfg.bootstrap_size = 15;
    const auto forest = train_forest(x, y, cfg, 5);
    const auto k = proximity_kernel(forest, x).values;
    for (Eigen::Index i = 0; i < 25; ++i) {
        for (Eigen::Index j = 0; j < 25; ++j) {
            int shared = 0;
            for (const auto& tree : forest.trees) shared += walk(tree, x, i) == walk(tree, x, j);
            EXPECT_DOUBLE_EQ(k(i, j), static_cast<double>(shared) / 15.0);
        }
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-10);
}

TEST(KmerfStatistic, ErrorsAndDeterminism) {
    std::mt19937_64 rng(6);
    const DataMatrix x = test::normal(12, 2, rng);
    const auto enc = one_way_labels(std::vector<std::size_t>{6, 6});
    std::vector<std::int32_t> labels(12, 0);
    ForestConfig cfg;
    cfg.trees = 10;
    EXPECT_THROW(kmerf_statistic(x, enc.y, labels, cfg, 1), InputError);
    std::fill(labels.begin() + 6, labels.end(), 1);
    EXPECT_EQ(kmerf_statistic(x, enc.y, labels, cfg, 1).value, kmerf_statistic(x, enc.y, labels, cfg, 1).value);
    EXPECT_THROW(kmerf_statistic(x.topRows(3), enc.y.topRows(3), std::span(labels).first(3), cfg, 1), SampleSizeError);
}

TEST(KmerfStatistic, SeparatedClustersAreDetected) {
    int rejections = 0;
    TestOptions options;
    options.forest.trees = 25;
    for (int m = 0; m < 100; ++m) {
        std::mt19937_64 rng(derive_seed(500, static_cast<std::uint64_t>(m)));
        const DataMatrix u = test::normal(20, 2, rng);
        const DataMatrix v = (test::normal(20, 2, rng).array() + 3.0).matrix();
        const auto problem = KSampleProblem::one_way(KSampleData({u, v}));
        options.forest_seed = static_cast<std::uint64_t>(m);
        const auto res = run_test("kmerf", problem, PermutationPlan::plain(40, 39, static_cast<std::uint64_t>(m)), options);
        rejections += res.p_value <= 0.05;
    }
    EXPECT_GE(rejections, 95);
}
