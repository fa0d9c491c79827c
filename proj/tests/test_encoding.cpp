#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ksample/encoding.hpp"
#include "test_util.hpp"

using namespace ksample;

TEST(ConcatGroups, StacksInOrder) {
    DataMatrix a(1, 1), b(1, 1);
    a << 1;
    b << 2;
    const auto x = concat_groups(KSampleData({a, b}));
    ASSERT_EQ(x.rows(), 2);
    EXPECT_EQ(x(0, 0), 1.0);
    EXPECT_EQ(x(1, 0), 2.0);
}

TEST(ConcatGroups, ThreeGroupsUnequalSizes) {
    DataMatrix a(2, 2), b(1, 2), c(1, 2);
    a << 1, 2, 3, 4;
    b << 5, 6;
    c << 7, 8;
    const auto x = concat_groups(KSampleData({a, b, c}));
    ASSERT_EQ(x.rows(), 4);
    for (int i = 0; i < 4; ++i) {
        EXPECT_EQ(x(i, 0), 2 * i + 1);
        EXPECT_EQ(x(i, 1), 2 * i + 2);
    }
}

TEST(ConcatGroups, RowCountIsTotal) {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> size(1, 20);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<DataMatrix> groups;
        int total = 0;
        for (int g = 0; g < 4; ++g) {
            const int s = size(rng);
            total += s;
            groups.push_back(test::normal(s, 3, rng));
        }
        EXPECT_EQ(concat_groups(KSampleData(groups)).rows(), total);
    }
}

TEST(ConcatGroups, DimensionMismatch) {
    EXPECT_THROW(KSampleData({DataMatrix::Zero(2, 1), DataMatrix::Zero(2, 2)}), InputError);
    EXPECT_THROW(KSampleData({DataMatrix::Zero(2, 1)}), InputError);
}

TEST(OneWayLabels, TwoSampleVector) {
    const auto enc = one_way_labels(std::vector<std::size_t>{1, 1});
    ASSERT_EQ(enc.y.rows(), 2);
    ASSERT_EQ(enc.y.cols(), 1);
    EXPECT_EQ(enc.y(0, 0), 0.0);
    EXPECT_EQ(enc.y(1, 0), 1.0);
}

TEST(OneWayLabels, SingletonsGiveIdentity) {
    const auto enc = one_way_labels(std::vector<std::size_t>{1, 1, 1});
    EXPECT_TRUE(enc.y.isApprox(Eigen::MatrixXd::Identity(3, 3)));
}

TEST(OneWayLabels, RejectsSingleGroup) {
    EXPECT_THROW(one_way_labels(std::vector<std::size_t>{5}), InputError);
}

TEST(OneWayLabels, BetweenGroupDistanceIsConstant) {
    for (const std::vector<std::size_t>& sizes :
         {std::vector<std::size_t>{3, 4}, std::vector<std::size_t>{2, 3, 4}, std::vector<std::size_t>{1, 2, 2, 5}}) {
        const auto enc = one_way_labels(sizes);
        const auto groups = group_index(sizes);
        const double between = sizes.size() == 2 ? 1.0 : std::sqrt(2.0);
        const auto n = static_cast<Eigen::Index>(groups.size());
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                const double d = (enc.y.row(i) - enc.y.row(j)).norm();
                const bool same = groups[static_cast<std::size_t>(i)] == groups[static_cast<std::size_t>(j)];
                EXPECT_NEAR(d, same ? 0.0 : between, 1e-15);
            }
        }
    }
}

TEST(MultiwayLabels, ThreeFactorPattern) {
    const std::vector<std::size_t> sizes{2, 1, 1};
    const auto enc = multiway_labels(sizes, {{0, 2}, {0, 1}, {1, 2}});
    EXPECT_EQ(enc.ways, 2u);
    Eigen::MatrixXd expected(4, 3);
    expected << 1, 0, 1, 1, 0, 1, 1, 1, 0, 0, 1, 1;
    EXPECT_EQ(enc.y, expected);
}

TEST(MultiwayLabels, SingletonsReduceToOneWay) {
    for (const std::vector<std::size_t>& sizes : {std::vector<std::size_t>{2, 3}, std::vector<std::size_t>{2, 3, 1}}) {
        std::vector<std::vector<std::size_t>> members;
        for (std::size_t s = 0; s < sizes.size(); ++s) members.push_back({s});
        EXPECT_EQ(multiway_labels(sizes, members).y, one_way_labels(sizes).y);
    }
}

TEST(MultiwayLabels, DistanceCountsDifferingFactors) {
    // {0,1} vs {0,2} differ in one factor, {0,1} vs {2,3} in two
    const auto enc = multiway_labels(std::vector<std::size_t>{1, 1, 1, 1}, {{0, 1}, {0, 2}, {2, 3}, {1, 3}});
    const double d1 = (enc.y.row(0) - enc.y.row(1)).norm();
    const double d2 = (enc.y.row(0) - enc.y.row(2)).norm();
    EXPECT_NEAR(d1, std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(d2, std::sqrt(2.0) * d1, 1e-15);
}

TEST(MultiwayLabels, CardinalityErrors) {
    const std::vector<std::size_t> sizes{1, 1, 1};
    EXPECT_THROW(multiway_labels(sizes, {{0, 1}, {0}, {1, 2}}), InputError);
    EXPECT_THROW(multiway_labels(sizes, {{0, 1, 2}, {0, 1, 2}, {0, 1, 2}}), InputError);
    EXPECT_THROW(multiway_labels(sizes, {{0, 0}, {0, 1}, {1, 2}}), InputError);
    EXPECT_THROW(multiway_labels(sizes, {{0, 3}, {0, 1}, {1, 2}}), InputError);
    EXPECT_THROW(multiway_labels(sizes, {{0, 1}, {1, 2}}), InputError);
}

TEST(MakeBlocks, TwoByTwo) {
    const auto b = make_blocks(2, 2);
    EXPECT_EQ(b.block_ids, (std::vector<std::size_t>{0, 0, 1, 1}));
    EXPECT_EQ(b.n_blocks(), 2u);
}

TEST(MakeBlocks, SingleBlock) {
    const auto b = make_blocks_for(7, 7);
    EXPECT_EQ(b.n_blocks(), 1u);
    EXPECT_EQ(b.block_ids, std::vector<std::size_t>(7, 0));
}

TEST(MakeBlocks, EveryIdHasBlockSizeMembers) {
    for (std::size_t nb = 1; nb < 6; ++nb) {
        for (std::size_t bs = 1; bs < 5; ++bs) {
            const auto b = make_blocks(nb, bs);
            std::vector<std::size_t> count(nb, 0);
            for (auto id : b.block_ids) ++count[id];
            for (auto c : count) EXPECT_EQ(c, bs);
        }
    }
}

TEST(MakeBlocks, NonDivisible) {
    EXPECT_THROW(make_blocks_for(7, 2), InputError);
    EXPECT_THROW(make_blocks(0, 2), InputError);
}
