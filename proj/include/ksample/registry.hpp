#pragma once

// Named k-sample tests. Each test is prepared once for a pooled sample and
// its label encoding and then evaluated as a function of a label permutation,
// so the permutation engine never recomputes anything that only depends on x.

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ksample/classical.hpp"
#include "ksample/core.hpp"
#include "ksample/encoding.hpp"
#include "ksample/error.hpp"
#include "ksample/kmerf.hpp"
#include "ksample/mgc.hpp"
#include "ksample/permutation.hpp"
#include "ksample/stats.hpp"

namespace ksample {

/// Pooled data, group index of every row, and the label encoding.
struct KSampleProblem {
    DataMatrix x;
    std::vector<std::size_t> sizes;
    std::vector<std::size_t> groups;
    LabelEncoding labels;

    [[nodiscard]] std::size_t n() const noexcept { return groups.size(); }
    [[nodiscard]] std::size_t k() const noexcept { return sizes.size(); }

    static KSampleProblem one_way(const KSampleData& data) {
        KSampleProblem p;
        p.x = concat_groups(data);
        p.sizes = data.sizes();
        p.groups = group_index(p.sizes);
        p.labels = one_way_labels(p.sizes);
        return p;
    }

    static KSampleProblem multiway(const KSampleData& data, const std::vector<std::vector<std::size_t>>& memberships) {
        KSampleProblem p = one_way(data);
        p.labels = multiway_labels(p.sizes, memberships);
        return p;
    }
};

struct TestOptions {
    ForestConfig forest{};
    std::uint64_t forest_seed = 0;
};

using PermutedStatistic = std::function<double(std::span<const std::size_t>)>;

/// sum_ij a(i, j) b(perm[i], perm[j])
inline double permuted_dot(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::span<const std::size_t> perm) {
    const auto n = static_cast<Eigen::Index>(perm.size());
    double total = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double* acol = a.col(j).data();
        const double* bcol = b.col(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(j)])).data();
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) s += acol[i] * bcol[perm[static_cast<std::size_t>(i)]];
        total += s;
    }
    return total;
}

inline std::vector<std::size_t> permuted_groups(std::span<const std::size_t> groups, std::span<const std::size_t> perm) {
    std::vector<std::size_t> out(groups.size());
    for (std::size_t i = 0; i < groups.size(); ++i) out[i] = groups[perm[i]];
    return out;
}

namespace registry_detail {

/// Dcov/HSIC style statistics: centered x and y matrices fixed, y permuted.
inline PermutedStatistic centered_statistic(const Eigen::MatrixXd& px, const Eigen::MatrixXd& py, Variant v,
                                            bool normalized) {
    const std::size_t n = static_cast<std::size_t>(px.rows());
    if (v == Variant::unbiased && n < 4) throw SampleSizeError("unbiased statistics require at least 4 samples");
    auto cx = std::make_shared<Eigen::MatrixXd>(detail::center(px, v).values);
    auto cy = std::make_shared<Eigen::MatrixXd>(detail::center(py, v).values);
    const double nd = static_cast<double>(n);
    double scale = v == Variant::biased ? 1.0 / (nd * nd) : 1.0 / (nd * (nd - 3.0));
    if (normalized) {
        const double vx = detail::centered_cov(*cx, *cx, v);
        const double vy = detail::centered_cov(*cy, *cy, v);
        scale = detail::normalize(scale, vx, vy);
    }
    return [cx, cy, scale](std::span<const std::size_t> perm) { return scale * permuted_dot(*cx, *cy, perm); };
}

inline void require_two_groups(const KSampleProblem& p, const std::string& name) {
    if (p.k() != 2) throw InputError(name + " is a two-sample test; got " + std::to_string(p.k()) + " groups");
}

}  // namespace registry_detail

inline const std::vector<std::string>& test_names() {
    static const std::vector<std::string> names{"dcorr", "dcorr-biased", "dcov-biased", "hsic",   "hsic-biased",
                                                "mgc",   "kmerf",        "energy",      "disco",  "mmd",
                                                "manova", "hotelling"};
    return names;
}

inline bool is_known_test(const std::string& name) {
    const auto& names = test_names();
    return std::find(names.begin(), names.end(), name) != names.end();
}

/// Builds the permutation-indexed statistic for a named test.
inline PermutedStatistic prepare_test(const std::string& name, const KSampleProblem& problem,
                                      const TestOptions& options = {}) {
    using namespace registry_detail;
    if (!is_known_test(name)) throw InputError("unknown test: " + name);
    if (problem.k() < 2) throw InputError("k-sample tests need at least two groups");

    if (name == "manova") {
        auto pillai = std::make_shared<PillaiPermuted>(problem.x, problem.groups, problem.k());
        return [pillai](std::span<const std::size_t> perm) { return (*pillai)(perm); };
    }
    if (name == "hotelling") {
        require_two_groups(problem, name);
        auto x = std::make_shared<DataMatrix>(problem.x);
        auto groups = std::make_shared<std::vector<std::size_t>>(problem.groups);
        const auto n1 = static_cast<Eigen::Index>(problem.sizes[0]);
        const auto n2 = static_cast<Eigen::Index>(problem.sizes[1]);
        return [x, groups, n1, n2](std::span<const std::size_t> perm) {
            DataMatrix u(n1, x->cols());
            DataMatrix v(n2, x->cols());
            Eigen::Index iu = 0;
            Eigen::Index iv = 0;
            for (std::size_t i = 0; i < groups->size(); ++i) {
                if ((*groups)[perm[i]] == 0) {
                    u.row(iu++) = x->row(static_cast<Eigen::Index>(i));
                } else {
                    v.row(iv++) = x->row(static_cast<Eigen::Index>(i));
                }
            }
            return hotelling_t2(u, v).value;
        };
    }

    const auto dx = pairwise_distances(problem.x);
    const auto dy = pairwise_distances(problem.labels.y);

    if (name == "dcorr") return centered_statistic(dx.values, dy.values, Variant::unbiased, true);
    if (name == "dcorr-biased") return centered_statistic(dx.values, dy.values, Variant::biased, true);
    if (name == "dcov-biased") return centered_statistic(dx.values, dy.values, Variant::biased, false);
    if (name == "hsic" || name == "hsic-biased") {
        const auto kx = gaussian_kernel(dx, Bandwidth::median());
        const auto ky = gaussian_kernel(dy, Bandwidth::median());
        return name == "hsic" ? centered_statistic(kx.values, ky.values, Variant::unbiased, true)
                              : centered_statistic(kx.values, ky.values, Variant::biased, false);
    }
    if (name == "mgc") {
        auto mgc = std::make_shared<MgcPermuted>(dx, dy);
        return [mgc](std::span<const std::size_t> perm) { return (*mgc)(perm).statistic; };
    }
    if (name == "energy" || name == "disco" || name == "mmd") {
        if (name == "mmd") require_two_groups(problem, name);
        auto m = std::make_shared<Eigen::MatrixXd>(
            name == "mmd" ? gaussian_kernel(dx, Bandwidth::median()).values : dx.values);
        auto groups = std::make_shared<std::vector<std::size_t>>(problem.groups);
        auto sizes = std::make_shared<std::vector<std::size_t>>(problem.sizes);
        const bool two_sample = problem.k() == 2 && name != "disco";
        const double sign = name == "mmd" ? -1.0 : 1.0;
        return [m, groups, sizes, two_sample, sign](std::span<const std::size_t> perm) {
            const auto g = permuted_groups(*groups, perm);
            if (two_sample) return sign * pairwise_energies(*m, g, *sizes)(0, 1);
            return disco_from_pairwise(*m, g, *sizes);
        };
    }
    // kmerf
    if (problem.n() < 4) throw SampleSizeError("KMERF requires at least 4 samples");
    auto x = std::make_shared<DataMatrix>(problem.x);
    auto groups = std::make_shared<std::vector<std::size_t>>(problem.groups);
    auto ly = std::make_shared<Eigen::MatrixXd>(u_center(induced_kernel(dy)).values);
    const double nd = static_cast<double>(problem.n());
    const double scale = 1.0 / (nd * (nd - 3.0));
    const auto forest = options.forest;
    const auto seed = options.forest_seed;
    return [x, groups, ly, scale, forest, seed](std::span<const std::size_t> perm) {
        std::vector<std::int32_t> labels(groups->size());
        for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::int32_t>((*groups)[perm[i]]);
        const auto trained = train_forest(*x, labels, forest, seed);
        const auto lx = u_center(proximity_kernel(trained, *x));
        return scale * permuted_dot(lx.values, *ly, perm);
    };
}

inline TestResult run_test(const std::string& name, const KSampleProblem& problem, const PermutationPlan& plan,
                           const TestOptions& options = {}, bool keep_null = false) {
    if (plan.n != problem.n()) throw InputError("permutation plan size does not match the data");
    return run_permutation_test(prepare_test(name, problem, options), plan, keep_null);
}

}  // namespace ksample
