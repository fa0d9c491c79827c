// ksample: k-sample testing via independence tests.
//
//   ksample test --test dcorr a.csv b.csv c.csv
//   ksample power --spec sweep.json --out power.csv
//   ksample check-theorems --trials 100
//   ksample simulate --simulation multilevel --param epsilon=0 --out ml

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "ksample/commands.hpp"

namespace {

std::map<std::string, double> parse_params(const std::vector<std::string>& items) {
    std::map<std::string, double> params;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw CLI::ValidationError("--param", "expected key=value: " + item);
        try {
            params[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
        } catch (const std::exception&) {
            throw CLI::ValidationError("--param", "not a number: " + item);
        }
    }
    return params;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace ksample;
    CLI::App app{"k-sample tests recast as independence tests"};
    app.require_subcommand(1);

    TestCommand test_cmd;
    auto* test = app.add_subcommand("test", "run a k-sample test on one CSV file per group");
    test->add_option("files", test_cmd.files, "group CSV files (rows = samples)")->required()->check(CLI::ExistingFile);
    test->add_option("--test", test_cmd.test, "test name")->capture_default_str();
    test->add_option("--permutations,-R", test_cmd.permutations, "permutation replicates")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    test->add_option("--seed", test_cmd.seed, "master seed")->capture_default_str();
    test->add_flag("--header", test_cmd.header, "skip one header line per file");
    test->add_option("--block-size", test_cmd.block_size, "permute contiguous blocks of this size");
    test->add_option("--trees", test_cmd.trees, "KMERF forest size")->capture_default_str()->check(CLI::PositiveNumber);

    PowerCommand power_cmd;
    std::size_t reps = 0, perms = 0, trees = 0;
    double alpha = 0.0;
    std::uint64_t power_seed = 0;
    auto* power = app.add_subcommand("power", "estimate power over a simulation sweep");
    power->add_option("--spec", power_cmd.spec_path, "benchmark spec (JSON)")->required()->check(CLI::ExistingFile);
    power->add_option("--out", power_cmd.out, "CSV output path (a .json sidecar is written next to it)");
    auto* reps_opt = power->add_option("--reps,-M", reps, "Monte-Carlo reps")->check(CLI::PositiveNumber);
    auto* perms_opt = power->add_option("--permutations,-R", perms, "permutation replicates")->check(CLI::PositiveNumber);
    auto* alpha_opt = power->add_option("--alpha", alpha, "level")->check(CLI::Range(0.0, 1.0));
    auto* seed_opt = power->add_option("--seed", power_seed, "master seed");
    auto* trees_opt = power->add_option("--trees", trees, "KMERF forest size")->check(CLI::PositiveNumber);

    std::size_t trials = 100;
    std::uint64_t theorem_seed = 0;
    auto* theorems = app.add_subcommand("check-theorems", "verify the statistic equivalences on random data");
    theorems->add_option("--trials", trials, "random datasets")->capture_default_str()->check(CLI::PositiveNumber);
    theorems->add_option("--seed", theorem_seed, "master seed")->capture_default_str();

    SimulateCommand sim_cmd;
    std::vector<std::string> sim_params;
    auto* simulate = app.add_subcommand("simulate", "write a generated dataset as one CSV per group");
    simulate
        ->add_option("--simulation", sim_cmd.simulation,
                     "gaussian_none_diff | gaussian_one_diff | gaussian_all_diff | multiway | multilevel | rotated:<id>")
        ->capture_default_str();
    simulate->add_option("--param", sim_params, "key=value (n, p, epsilon, c, theta, kappa, n_means, n_per)");
    simulate->add_option("--seed", sim_cmd.seed, "seed")->capture_default_str();
    simulate->add_option("--out", sim_cmd.out, "output prefix; stdout when omitted");

    try {
        app.parse(argc, argv);
        if (simulate->parsed()) sim_cmd.params = parse_params(sim_params);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (test->parsed()) return cmd_test(test_cmd, std::cout, std::cerr);
    if (power->parsed()) {
        if (*reps_opt) power_cmd.reps = reps;
        if (*perms_opt) power_cmd.permutations = perms;
        if (*alpha_opt) power_cmd.alpha = alpha;
        if (*seed_opt) power_cmd.seed = power_seed;
        if (*trees_opt) power_cmd.trees = trees;
        return cmd_power(power_cmd, std::cout, std::cerr);
    }
    if (theorems->parsed()) return cmd_check_theorems(trials, theorem_seed, std::cout, std::cerr);
    return cmd_simulate(sim_cmd, std::cout, std::cerr);
}
