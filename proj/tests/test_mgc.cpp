#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ksample/mgc.hpp"
#include "ksample/permutation.hpp"
#include "test_util.hpp"

using namespace ksample;

namespace {

// Brute-force neighbor ranks: stable sort of each row with self forced first.
Eigen::MatrixXi oracle_ranks(const Eigen::MatrixXd& d) {
    const auto n = d.rows();
    Eigen::MatrixXi r(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            if (a == i || b == i) return a == i && b != i;
            return d(i, a) < d(i, b);
        });
        for (Eigen::Index pos = 0; pos < n; ++pos) r(i, order[static_cast<std::size_t>(pos)]) = static_cast<int>(pos);
    }
    return r;
}

Eigen::MatrixXd oracle_center(const Eigen::MatrixXd& d) {
    const auto n = d.rows();
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double mean = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (i != j) mean += d(i, j);
        mean /= static_cast<double>(n - 1);
        for (Eigen::Index i = 0; i < n; ++i) a(i, j) = i == j ? 0.0 : d(i, j) - mean;
    }
    return a;
}

// c(k, l) evaluated directly from the neighbor indicators, one scale at a time.
double oracle_local_corr(const Eigen::MatrixXd& dx, const Eigen::MatrixXd& dy, int k, int l) {
    const auto rx = oracle_ranks(dx);
    const auto ry = oracle_ranks(dy);
    const auto a = oracle_center(dx);
    const auto b = oracle_center(dy);
    double cov = 0.0, vx = 0.0, vy = 0.0;
    for (Eigen::Index i = 0; i < dx.rows(); ++i) {
        for (Eigen::Index j = 0; j < dx.rows(); ++j) {
            if (i == j) continue;
            const bool gx = rx(i, j) < k;
            const bool gy = ry(i, j) < l;
            if (gx && gy) cov += a(i, j) * b(i, j);
            if (gx) vx += a(i, j) * a(i, j);
            if (gy) vy += b(i, j) * b(i, j);
        }
    }
    return vx * vy > 0.0 ? cov / std::sqrt(vx * vy) : 0.0;
}

DistanceMatrix line(std::initializer_list<double> v) {
    DataMatrix m(static_cast<Eigen::Index>(v.size()), 1);
    Eigen::Index i = 0;
    for (double x : v) m(i++, 0) = x;
    return pairwise_distances(m);
}

}  // namespace

TEST(KnnGraph, FullNeighborhoodIsAllOnes) {
    std::mt19937_64 rng(1);
    const auto d = pairwise_distances(test::normal(7, 2, rng));
    EXPECT_TRUE((knn_graph(d, 7).indicator.array() == 1).all());
}

TEST(KnnGraph, OneNeighborIsSelf) {
    const auto g = knn_graph(line({0, 1, 2}), 1);
    Eigen::Matrix<std::uint8_t, 3, 3> eye = Eigen::Matrix<std::uint8_t, 3, 3>::Identity();
    EXPECT_TRUE(g.indicator == eye);
}

TEST(KnnGraph, RowSumsAndTies) {
    std::mt19937_64 rng(2);
    const auto d = pairwise_distances(test::normal(9, 2, rng));
    for (std::size_t k = 1; k <= 9; ++k) {
        const auto g = knn_graph(d, k);
        for (Eigen::Index i = 0; i < 9; ++i) EXPECT_EQ(g.indicator.row(i).cast<int>().sum(), static_cast<int>(k));
    }
    // row 1 of {0,1,2}: both 0 and 2 are at distance 1, the lower index wins
    const auto tie = knn_graph(line({0, 1, 2}), 2);
    EXPECT_EQ(tie.indicator(1, 0), 1);
    EXPECT_EQ(tie.indicator(1, 2), 0);
    EXPECT_THROW(knn_graph(d, 0), InputError);
    EXPECT_THROW(knn_graph(d, 10), InputError);
}

TEST(LocalCorrMap, MatchesPerScaleOracle) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 3; ++trial) {
        const DataMatrix x = test::normal(9, 2, rng);
        DataMatrix y = x.col(0).array().square().matrix() + 0.3 * test::normal(9, 1, rng);
        const auto dx = pairwise_distances(x);
        const auto dy = pairwise_distances(y);
        const auto map = local_corr_map(dx, dy);
        ASSERT_EQ(map.values.rows(), 9);
        for (int k = 1; k <= 9; ++k)
            for (int l = 1; l <= 9; ++l)
                EXPECT_NEAR(map.values(k - 1, l - 1), oracle_local_corr(dx.values, dy.values, k, l), 1e-12)
                    << k << "," << l;
    }
}

TEST(LocalCorrMap, TiedLabelDistances) {
    // label distances take two values; the counting rank path must agree with the oracle
    std::mt19937_64 rng(4);
    const auto dx = pairwise_distances(test::normal(12, 2, rng));
    const auto dy = pairwise_distances(one_way_labels(std::vector<std::size_t>{4, 4, 4}).y);
    const auto map = local_corr_map(dx, dy);
    for (int k = 1; k <= 12; ++k)
        for (int l = 1; l <= 12; ++l)
            EXPECT_NEAR(map.values(k - 1, l - 1), oracle_local_corr(dx.values, dy.values, k, l), 1e-12);
}

TEST(LocalCorrMap, IdenticalAndConstant) {
    std::mt19937_64 rng(5);
    const auto d = pairwise_distances(test::normal(10, 2, rng));
    EXPECT_NEAR(local_corr_map(d, d).global(), 1.0, 1e-12);
    const auto zero = pairwise_distances(DataMatrix::Zero(10, 1));
    EXPECT_EQ(local_corr_map(zero, d).values.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_THROW(local_corr_map(line({0, 1, 2}), line({0, 1, 2})), SampleSizeError);
}

TEST(LocalCorrMap, Bounded) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        const auto dx = pairwise_distances(test::normal(20, 2, rng));
        const auto dy = pairwise_distances(test::normal(20, 3, rng));
        EXPECT_LE(local_corr_map(dx, dy).values.cwiseAbs().maxCoeff(), 1.0 + 1e-9);
    }
}

TEST(MgcStatistic, IdenticalDataAttainsOneAtGlobalScale) {
    std::mt19937_64 rng(7);
    const auto d = pairwise_distances(test::normal(15, 2, rng));
    const auto r = mgc_statistic(d, d);
    EXPECT_NEAR(r.statistic, 1.0, 1e-12);
    EXPECT_EQ(r.optimal_scale, (std::pair<std::size_t, std::size_t>{15, 15}));
}

TEST(MgcStatistic, AtLeastGlobalWhenRegionContainsIt) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        const DataMatrix x = test::normal(30, 1, rng);
        const DataMatrix y = x.array().cos().matrix() + 0.2 * test::normal(30, 1, rng);
        const auto dx = pairwise_distances(x);
        const auto dy = pairwise_distances(y);
        const auto map = local_corr_map(dx, dy);
        const auto r = mgc_statistic(dx, dy);
        EXPECT_GE(r.statistic, map.global() - 1e-15);
        const auto smooth = smooth_local_corr(map.values);
        EXPECT_NEAR(r.statistic, smooth.maxCoeff(), 1e-15);
    }
}

TEST(MgcStatistic, FallsBackWithoutRegion) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Constant(10, 10, 0.1);
    c(3, 3) = 0.9;  // isolated spike: region of size 1 < 2n
    const auto smooth = smooth_local_corr(c);
    EXPECT_TRUE((smooth.array() == 0.1).all());
    c.block(0, 0, 10, 3).setConstant(0.8);  // 30 entries >= 2n
    const auto kept = smooth_local_corr(c);
    EXPECT_DOUBLE_EQ(kept(0, 0), 0.8);
    EXPECT_DOUBLE_EQ(kept(3, 3), 0.9);
}

TEST(MgcPermuted, IdentityMatchesDirectAndPermutationMatchesRelabeling) {
    std::mt19937_64 rng(9);
    const DataMatrix x = test::normal(16, 2, rng);
    const DataMatrix y = test::normal(16, 1, rng);
    const auto dx = pairwise_distances(x);
    const auto dy = pairwise_distances(y);
    const MgcPermuted mgc(dx, dy);
    std::vector<std::size_t> ident(16);
    std::iota(ident.begin(), ident.end(), std::size_t{0});
    EXPECT_NEAR(mgc(ident).statistic, mgc_statistic(dx, dy).statistic, 1e-14);
    const auto perm = test::random_perm(16, rng);
    const auto direct = mgc_statistic(dx, pairwise_distances(permute_rows(y, perm)));
    EXPECT_NEAR(mgc(perm).statistic, direct.statistic, 1e-12);
}

TEST(MgcPermuted, NullPValuesRoughlyUniform) {
    const int reps = 200;
    std::vector<int> bins(10, 0);
    for (int m = 0; m < reps; ++m) {
        std::mt19937_64 rng(derive_seed(77, static_cast<std::uint64_t>(m)));
        const auto dx = pairwise_distances(test::normal(100, 1, rng));
        const auto dy = pairwise_distances(test::normal(100, 1, rng));
        const auto mgc = std::make_shared<MgcPermuted>(dx, dy);
        const auto plan = PermutationPlan::plain(100, 99, static_cast<std::uint64_t>(m));
        const auto res = run_permutation_test([&](std::span<const std::size_t> p) { return (*mgc)(p).statistic; }, plan);
        // p = c / 100 with c in 1..100; decile c = 1..10 -> bin 0, and so on
        const auto c = static_cast<int>(std::lround(res.p_value * 100));
        ++bins[(c - 1) / 10];
    }
    const double expected = reps / 10.0;
    const double sd = std::sqrt(reps * 0.1 * 0.9);
    for (int b = 0; b < 10; ++b) EXPECT_LE(std::abs(bins[b] - expected), 3.0 * sd) << "bin " << b;
}
