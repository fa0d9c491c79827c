#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "ksample/classical.hpp"
#include "test_util.hpp"

using namespace ksample;

namespace {

DataMatrix col(std::initializer_list<double> v) {
    DataMatrix m(static_cast<Eigen::Index>(v.size()), 1);
    Eigen::Index i = 0;
    for (double x : v) m(i++, 0) = x;
    return m;
}

double pooled_t(const DataMatrix& u, const DataMatrix& v) {
    const double n = static_cast<double>(u.rows());
    const double m = static_cast<double>(v.rows());
    const double mu = u.mean();
    const double mv = v.mean();
    const double ss = (u.array() - mu).square().sum() + (v.array() - mv).square().sum();
    const double s2 = ss / (n + m - 2.0);
    return (mu - mv) / std::sqrt(s2 * (1.0 / n + 1.0 / m));
}

}  // namespace

TEST(Hotelling, HandFixture) {
    EXPECT_DOUBLE_EQ(hotelling_t2(col({0, 2}), col({2, 4})).value, 2.0);
}

TEST(Hotelling, EqualMeansGiveZero) {
    EXPECT_NEAR(hotelling_t2(col({0, 2, 4}), col({1, 3})).value, 0.0, 1e-15);
}

TEST(Hotelling, OneDimensionalIsSquaredT) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const DataMatrix u = test::normal(7, 1, rng);
        const DataMatrix v = test::normal(11, 1, rng);
        const double t = pooled_t(u, v);
        EXPECT_NEAR(hotelling_t2(u, v).value, t * t, 1e-10 * std::max(1.0, t * t));
    }
}

TEST(Hotelling, SingularPooledCovariance) {
    std::mt19937_64 rng(2);
    EXPECT_THROW(hotelling_t2(test::normal(2, 3, rng), test::normal(2, 3, rng)), SingularityError);
}

TEST(Manova, HandFixture) {
    const auto s = covariance_summary(KSampleData({col({0, 2}), col({2, 4})}));
    EXPECT_DOUBLE_EQ(s.between(0, 0), 4.0);
    EXPECT_DOUBLE_EQ(s.within(0, 0), 4.0);
    EXPECT_DOUBLE_EQ(manova_pillai(KSampleData({col({0, 2}), col({2, 4})})).value, 0.5);
}

TEST(Manova, IdenticalGroupsGiveZero) {
    std::mt19937_64 rng(3);
    const DataMatrix g = test::normal(6, 2, rng);
    EXPECT_NEAR(manova_pillai(KSampleData({g, g, g})).value, 0.0, 1e-14);
}

TEST(Manova, TraceMatchesEigenvalueFormAndBounds) {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> groups(2, 4), dim(1, 4);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = groups(rng);
        const int p = dim(rng);
        std::vector<DataMatrix> g;
        for (int s = 0; s < k; ++s) g.push_back((test::normal(8, p, rng).array() + 0.5 * s).matrix());
        const KSampleData data(g);
        const double trace = manova_pillai(data).value;
        EXPECT_NEAR(trace, pillai_from_eigenvalues(data), 1e-10);
        EXPECT_GE(trace, -1e-12);
        EXPECT_LE(trace, std::min(k - 1, p) + 1e-12);
    }
}

TEST(Manova, DimensionAboveSampleCountIsSingular) {
    std::mt19937_64 rng(5);
    EXPECT_THROW(manova_pillai(KSampleData({test::normal(10, 40, rng), test::normal(10, 40, rng)})), SingularityError);
}

TEST(PillaiPermuted, MatchesDirectEvaluation) {
    std::mt19937_64 rng(6);
    const std::vector<std::size_t> sizes{5, 7, 6};
    std::vector<DataMatrix> g;
    for (auto s : sizes) g.push_back(test::normal(static_cast<Eigen::Index>(s), 3, rng));
    const KSampleData data(g);
    const DataMatrix x = concat_groups(data);
    const auto groups = group_index(sizes);
    const PillaiPermuted pillai(x, groups, 3);
    std::vector<std::size_t> id(18);
    std::iota(id.begin(), id.end(), std::size_t{0});
    EXPECT_NEAR(pillai(id), manova_pillai(data).value, 1e-12);
    for (int trial = 0; trial < 10; ++trial) {
        const auto perm = test::random_perm(18, rng);
        std::vector<DataMatrix> regrouped(3);
        std::vector<std::vector<Eigen::Index>> rows(3);
        for (std::size_t i = 0; i < 18; ++i) rows[groups[perm[i]]].push_back(static_cast<Eigen::Index>(i));
        for (std::size_t s = 0; s < 3; ++s) regrouped[s] = x(rows[s], Eigen::all);
        EXPECT_NEAR(pillai(perm), manova_pillai(KSampleData(regrouped)).value, 1e-12);
    }
}
