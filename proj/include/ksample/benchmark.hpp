#pragma once

// Power sweeps and randomized identity checks. A sweep runs every listed test
// on M simulated datasets per sweep point; dataset (point, rep) is generated
// from a seed derived from (master seed, point, rep), so results do not depend
// on scheduling.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ksample/error.hpp"
#include "ksample/parallel.hpp"
#include "ksample/permutation.hpp"
#include "ksample/registry.hpp"
#include "ksample/simulations.hpp"
#include "ksample/stats.hpp"

namespace ksample {

/// A test entry is a registry name with optional modifiers: ":block" permutes
/// whole subjects (multilevel data) and ":multiway" uses the multiway label
/// encoding (multiway data).
struct TestSpec {
    std::string name;
    bool block = false;
    bool multiway = false;

    static TestSpec parse(const std::string& entry) {
        TestSpec t;
        std::stringstream ss(entry);
        std::string part;
        std::getline(ss, t.name, ':');
        while (std::getline(ss, part, ':')) {
            if (part == "block") {
                t.block = true;
            } else if (part == "multiway") {
                t.multiway = true;
            } else {
                throw InputError("unknown test modifier '" + part + "' in " + entry);
            }
        }
        if (!is_known_test(t.name)) throw InputError("unknown test: " + t.name);
        return t;
    }
};

struct BenchmarkSpec {
    std::vector<std::string> tests;
    std::string simulation = "gaussian_one_diff";
    std::map<std::string, double> params;  // n, p, epsilon, c, theta, kappa, n_means, n_per
    std::string sweep_param = "epsilon";
    std::vector<double> sweep_values;
    double alpha = 0.05;
    std::size_t reps = 200;          // Monte-Carlo datasets per sweep point (M)
    std::size_t permutations = 200;  // permutation replicates per test (R)
    std::uint64_t seed = 0;
    std::size_t trees = 100;  // KMERF forest size
    std::string out;

    [[nodiscard]] double param(const std::string& key, double fallback) const {
        const auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    }

    void validate() const {
        if (tests.empty()) throw InputError("benchmark spec lists no tests");
        for (const auto& t : tests) (void)TestSpec::parse(t);
        if (sweep_values.empty()) throw InputError("benchmark sweep grid is empty");
        if (sweep_param.empty()) throw InputError("benchmark sweep parameter is missing");
        if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
        if (reps < 1) throw InputError("Monte-Carlo reps must be at least 1");
        if (permutations < 1) throw InputError("permutation reps must be at least 1");
        if (trees < 1) throw InputError("forest size must be at least 1");
        static const std::vector<std::string> fixed{"gaussian_none_diff", "gaussian_one_diff", "gaussian_all_diff",
                                                    "multiway", "multilevel"};
        const bool rotated = simulation.rfind("rotated:", 0) == 0;
        if (rotated) {
            (void)find_simulation(simulation.substr(8));
        } else if (std::find(fixed.begin(), fixed.end(), simulation) == fixed.end()) {
            throw InputError("unknown benchmark simulation: " + simulation);
        }
    }
};

inline void to_json(nlohmann::json& j, const BenchmarkSpec& s) {
    j = nlohmann::json{{"tests", s.tests},
                       {"simulation", s.simulation},
                       {"params", s.params},
                       {"sweep", {{"param", s.sweep_param}, {"values", s.sweep_values}}},
                       {"alpha", s.alpha},
                       {"reps", s.reps},
                       {"permutations", s.permutations},
                       {"seed", s.seed},
                       {"trees", s.trees},
                       {"out", s.out}};
}

inline void from_json(const nlohmann::json& j, BenchmarkSpec& s) {
    j.at("tests").get_to(s.tests);
    s.simulation = j.value("simulation", s.simulation);
    s.params = j.value("params", s.params);
    if (j.contains("sweep")) {
        const auto& sw = j.at("sweep");
        s.sweep_param = sw.value("param", s.sweep_param);
        sw.at("values").get_to(s.sweep_values);
    }
    s.alpha = j.value("alpha", s.alpha);
    s.reps = j.value("reps", s.reps);
    s.permutations = j.value("permutations", s.permutations);
    s.seed = j.value("seed", s.seed);
    s.trees = j.value("trees", s.trees);
    s.out = j.value("out", s.out);
}

inline BenchmarkSpec parse_benchmark_spec(const std::string& text) {
    BenchmarkSpec s;
    try {
        s = nlohmann::json::parse(text).get<BenchmarkSpec>();
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("invalid benchmark spec: ") + e.what());
    }
    s.validate();
    return s;
}

/// One generated benchmark dataset with whatever structure the setting carries.
struct SimDataset {
    KSampleData data;
    std::optional<BlockStructure> blocks;
    std::vector<std::vector<std::size_t>> memberships;
};

/// Dataset for a benchmark simulation with `point` overriding the swept parameter.
inline SimDataset generate_dataset(const BenchmarkSpec& spec, double point, std::uint64_t seed) {
    auto get = [&](const std::string& key, double fallback) {
        return key == spec.sweep_param ? point : spec.param(key, fallback);
    };
    auto count = [&](const std::string& key, double fallback) {
        const double v = get(key, fallback);
        if (!(v >= 1.0) || v != std::floor(v)) throw InputError(key + " must be a positive integer");
        return static_cast<Eigen::Index>(v);
    };
    const auto& sim = spec.simulation;
    if (sim == "gaussian_none_diff" || sim == "gaussian_one_diff" || sim == "gaussian_all_diff") {
        const auto setting = sim == "gaussian_none_diff" ? GaussianSetting::none_diff
                             : sim == "gaussian_one_diff" ? GaussianSetting::one_diff
                                                          : GaussianSetting::all_diff;
        return {gaussian_three_sample(setting, get("epsilon", 0.0), count("p", 2), count("n", 100), seed), {}, {}};
    }
    if (sim == "multiway") {
        auto mw = multiway_gaussian(get("epsilon", 0.0), get("c", 0.3), count("p", 2), count("n", 100), seed);
        return {std::move(mw.data), std::nullopt, std::move(mw.memberships)};
    }
    if (sim == "multilevel") {
        auto ml = multilevel_gaussian(get("epsilon", 0.0), static_cast<std::size_t>(count("n_means", 100)),
                                      static_cast<std::size_t>(count("n_per", 2)), seed);
        return {std::move(ml.data), std::move(ml.blocks), {}};
    }
    // rotated:<id>
    return {rotated_three_sample(sim.substr(8), RotationAngle(get("theta", 90.0)), count("n", 100), count("p", 1),
                                 get("kappa", kDefaultNoise), seed),
            {},
            {}};
}

/// Problem handed to a test. Two-sample tests on k >= 3 data compare the
/// first and last groups.
inline KSampleProblem problem_for(const TestSpec& test, const SimDataset& ds) {
    const bool two_sample_only = test.name == "hotelling" || test.name == "mmd";
    if (two_sample_only && ds.data.k() > 2) {
        if (test.block) throw InputError(test.name + " cannot use block permutation on k > 2 data");
        return KSampleProblem::one_way(KSampleData({ds.data.groups.front(), ds.data.groups.back()}));
    }
    if (test.multiway) {
        if (ds.memberships.empty()) throw InputError("multiway test requested on data without memberships");
        return KSampleProblem::multiway(ds.data, ds.memberships);
    }
    return KSampleProblem::one_way(ds.data);
}

struct PowerRecord {
    std::string test;
    std::string param_name;
    double param_value = 0.0;
    double power = 0.0;
    double se = 0.0;
    std::size_t m = 0;
    std::size_t r = 0;
    std::uint64_t seed = 0;
};

inline PowerRecord make_power_record(std::string test, std::string param, double value, std::size_t rejections,
                                     std::size_t m, std::size_t r, std::uint64_t seed) {
    const double power = static_cast<double>(rejections) / static_cast<double>(m);
    return {std::move(test), std::move(param), value, power, std::sqrt(power * (1.0 - power) / static_cast<double>(m)),
            m, r, seed};
}

/// p-value of one test on one dataset; plan and forest seeds derive from `seed`.
inline double dataset_p_value(const TestSpec& test, const SimDataset& ds, std::size_t permutations,
                              std::size_t trees, std::uint64_t seed) {
    const auto problem = problem_for(test, ds);
    PermutationPlan plan = PermutationPlan::plain(problem.n(), permutations, derive_seed(seed, 1));
    if (test.block) {
        if (!ds.blocks) throw InputError("block permutation requested on data without blocks");
        plan = PermutationPlan::block(*ds.blocks, permutations, derive_seed(seed, 1));
    }
    TestOptions options;
    options.forest.trees = trees;
    options.forest_seed = derive_seed(seed, 2);
    return run_test(test.name, problem, plan, options).p_value;
}

/// Rows sorted by (test, sweep value); rejection iff p <= alpha.
inline std::vector<PowerRecord> run_power(const BenchmarkSpec& spec) {
    spec.validate();
    std::vector<TestSpec> tests;
    for (const auto& t : spec.tests) tests.push_back(TestSpec::parse(t));
    const std::size_t points = spec.sweep_values.size();
    const std::size_t nt = tests.size();
    // rejected[(point * reps + rep) * nt + test]
    std::vector<std::uint8_t> rejected(points * spec.reps * nt, 0);
    parallel_for(points * spec.reps, [&](std::size_t task) {
        const std::size_t point = task / spec.reps;
        const std::size_t rep = task % spec.reps;
        const std::uint64_t seed = derive_seed(spec.seed, point, rep);
        const auto ds = generate_dataset(spec, spec.sweep_values[point], seed);
        for (std::size_t t = 0; t < nt; ++t) {
            const double p = dataset_p_value(tests[t], ds, spec.permutations, spec.trees, derive_seed(seed, 100 + t));
            rejected[task * nt + t] = p <= spec.alpha;
        }
    });
    std::vector<PowerRecord> rows;
    for (std::size_t t = 0; t < nt; ++t) {
        for (std::size_t point = 0; point < points; ++point) {
            std::size_t count = 0;
            for (std::size_t rep = 0; rep < spec.reps; ++rep) count += rejected[(point * spec.reps + rep) * nt + t];
            rows.push_back(make_power_record(spec.tests[t], spec.sweep_param, spec.sweep_values[point], count,
                                             spec.reps, spec.permutations, spec.seed));
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const PowerRecord& a, const PowerRecord& b) {
        return a.test != b.test ? a.test < b.test : a.param_value < b.param_value;
    });
    return rows;
}

inline constexpr const char* kPowerCsvHeader = "test,param_name,param_value,power,se,m,r,seed";

inline void write_power_csv(std::ostream& os, const std::vector<PowerRecord>& rows) {
    os << kPowerCsvHeader << '\n';
    std::ostringstream line;
    line << std::setprecision(10);
    for (const auto& r : rows) {
        line.str("");
        line << r.test << ',' << r.param_name << ',' << r.param_value << ',' << r.power << ',' << r.se << ',' << r.m
             << ',' << r.r << ',' << r.seed << '\n';
        os << line.str();
    }
}

// ---------------------------------------------------------------------------
// Randomized identity checks.

struct TheoremReport {
    std::size_t trials = 0;
    std::uint64_t seed = 0;
    double dcov_energy_max_residual = 0.0;  // residual / tolerance, max over trials
    double hsic_mmd_max_residual = 0.0;
    double dcov_disco_max_residual = 0.0;
    double dcov_disco_balanced_max_residual = 0.0;  // equal-size trials only
    double dcov_disco_unbalanced_residual = 0.0;    // sizes (3, 5, 7): expected to be large
    std::size_t dcov_energy_matches = 0;
    std::size_t hsic_mmd_matches = 0;
    std::size_t pvalue_trials = 0;

    [[nodiscard]] bool dcov_energy_ok() const noexcept { return dcov_energy_max_residual < 1.0; }
    [[nodiscard]] bool hsic_mmd_ok() const noexcept { return hsic_mmd_max_residual < 1.0; }
    [[nodiscard]] bool dcov_disco_ok() const noexcept {
        return dcov_disco_max_residual < 1.0 && dcov_disco_balanced_max_residual < 1.0 && dcov_disco_unbalanced_residual > 1e-6;
    }
    [[nodiscard]] bool pvalues_ok() const noexcept {
        return dcov_energy_matches == pvalue_trials && hsic_mmd_matches == pvalue_trials;
    }
    [[nodiscard]] bool ok() const noexcept { return dcov_energy_ok() && hsic_mmd_ok() && dcov_disco_ok() && pvalues_ok(); }
};

namespace benchmark_detail {

inline DataMatrix normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) { return standard_normal(rows, cols, rng); }

inline double relative(const IdentityCheck& c) { return c.residual / c.tolerance; }

}  // namespace benchmark_detail

/// Random two-sample draws with n1, n2 in [1, 30] and p in [1, 5] for the
/// two-sample identities; k in {2, 3, 4} with sizes in [1, 15] for the k-sample
/// identity, every third trial balanced; p-value equality with R = 199.
inline TheoremReport check_theorems(std::size_t trials, std::uint64_t seed, std::size_t permutations = 199) {
    if (trials < 1) throw InputError("theorem checks need at least one trial");
    using benchmark_detail::normal;
    using benchmark_detail::relative;
    TheoremReport rep;
    rep.trials = trials;
    rep.seed = seed;
    rep.pvalue_trials = trials;
    std::vector<double> dcov_energy(trials), hsic_mmd(trials), dcov_disco(trials), balanced(trials, 0.0);
    std::vector<std::uint8_t> de(trials), hm(trials);
    parallel_for(trials, [&](std::size_t t) {
        Rng rng(derive_seed(seed, t));
        std::uniform_int_distribution<int> size(1, 30), dim(1, 5), groups(2, 4), ksize(1, 15);
        const int p = dim(rng);
        const DataMatrix u = normal(size(rng), p, rng);
        const DataMatrix v = (normal(size(rng), p, rng).array() + 0.25).matrix();
        dcov_energy[t] = relative(check_dcov_energy(u, v));
        hsic_mmd[t] = relative(check_hsic_mmd(u, v, 1.0));

        const int k = groups(rng);
        const bool equal = t % 3 == 0;
        const int common = ksize(rng);
        std::vector<DataMatrix> g;
        for (int s = 0; s < k; ++s) g.push_back(normal(equal ? common : ksize(rng), p, rng));
        const auto disco = check_dcov_disco(KSampleData(g));
        dcov_disco[t] = relative(disco.weighted);
        if (disco.equal_sizes) balanced[t] = relative(disco.balanced);

        // p-value equality needs a nondegenerate median bandwidth: at least 3 rows
        const DataMatrix pu = normal(2 + size(rng), p, rng);
        const DataMatrix pv = (normal(2 + size(rng), p, rng).array() + 0.25).matrix();
        const auto problem = KSampleProblem::one_way(KSampleData({pu, pv}));
        const auto plan = PermutationPlan::plain(problem.n(), permutations, derive_seed(seed, t, 1));
        de[t] = run_test("dcov-biased", problem, plan).p_value == run_test("energy", problem, plan).p_value;
        hm[t] = run_test("hsic-biased", problem, plan).p_value == run_test("mmd", problem, plan).p_value;
    });
    rep.dcov_energy_max_residual = *std::max_element(dcov_energy.begin(), dcov_energy.end());
    rep.hsic_mmd_max_residual = *std::max_element(hsic_mmd.begin(), hsic_mmd.end());
    rep.dcov_disco_max_residual = *std::max_element(dcov_disco.begin(), dcov_disco.end());
    rep.dcov_disco_balanced_max_residual = *std::max_element(balanced.begin(), balanced.end());
    rep.dcov_energy_matches = static_cast<std::size_t>(std::count(de.begin(), de.end(), 1));
    rep.hsic_mmd_matches = static_cast<std::size_t>(std::count(hm.begin(), hm.end(), 1));

    Rng rng(derive_seed(seed, trials));
    const auto fixture = check_dcov_disco(KSampleData({normal(3, 2, rng), normal(5, 2, rng), normal(7, 2, rng)}));
    rep.dcov_disco_unbalanced_residual = fixture.balanced.residual;
    return rep;
}

inline nlohmann::json report_json(const TheoremReport& r) {
    return {{"trials", r.trials},
            {"seed", r.seed},
            {"tolerance", "1e-9 * max(1, |lhs|)"},
            {"dcov_energy", {{"max_relative_residual", r.dcov_energy_max_residual}, {"pass", r.dcov_energy_ok()}}},
            {"hsic_mmd", {{"max_relative_residual", r.hsic_mmd_max_residual}, {"pass", r.hsic_mmd_ok()}}},
            {"dcov_disco",
             {{"weighted_max_relative_residual", r.dcov_disco_max_residual},
              {"balanced_max_relative_residual", r.dcov_disco_balanced_max_residual},
              {"unbalanced_fixture_residual", r.dcov_disco_unbalanced_residual},
              {"pass", r.dcov_disco_ok()}}},
            {"pvalue_equality",
             {{"dcov_energy", r.dcov_energy_matches},
              {"hsic_mmd", r.hsic_mmd_matches},
              {"trials", r.pvalue_trials},
              {"pass", r.pvalues_ok()}}},
            {"pass", r.ok()}};
}

}  // namespace ksample
