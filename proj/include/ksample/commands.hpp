#pragma once

// Subcommand bodies behind the command-line tool. They take streams instead of
// touching stdout directly so they can be exercised in-process.

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ksample/benchmark.hpp"
#include "ksample/error.hpp"
#include "ksample/registry.hpp"
#include "ksample/simulations.hpp"

namespace ksample {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2, kExitTheorem = 3 };

/// Numeric CSV: rows are samples, columns features; commas and/or whitespace
/// separate fields; blank lines are skipped.
inline DataMatrix read_csv(std::istream& in, bool header = false, const std::string& source = "input") {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    if (header) {
        std::getline(in, line);
        ++line_no;
    }
    while (std::getline(in, line)) {
        ++line_no;
        for (auto& ch : line) {
            if (ch == ',' || ch == '\t' || ch == '\r') ch = ' ';
        }
        std::istringstream fields(line);
        std::vector<double> row;
        std::string tok;
        while (fields >> tok) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(tok, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != tok.size()) {
                throw InputError(source + ":" + std::to_string(line_no) + ": not a number: '" + tok + "'");
            }
            row.push_back(v);
        }
        if (row.empty()) continue;
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw InputError(source + ":" + std::to_string(line_no) + ": inconsistent column count");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw InputError(source + ": no data rows");
    DataMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    require_finite(m, source.c_str());
    return m;
}

inline DataMatrix read_csv_file(const std::string& path, bool header = false) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return read_csv(in, header, path);
}

inline void write_csv(std::ostream& os, const DataMatrix& m) {
    os << std::setprecision(17);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << m(i, j);
        os << '\n';
    }
}

struct TestCommand {
    std::vector<std::string> files;
    std::string test = "dcorr";
    std::size_t permutations = 1000;
    std::uint64_t seed = 0;
    bool header = false;
    std::size_t block_size = 0;  // > 0 selects block permutation over contiguous blocks
    std::size_t trees = 500;
};

inline int cmd_test(const TestCommand& cmd, std::ostream& out, std::ostream& err) {
    if (!is_known_test(cmd.test)) {
        err << "unknown test '" << cmd.test << "'\n";
        return kExitUsage;
    }
    if (cmd.files.size() < 2) {
        err << "test needs at least two input files (one per group)\n";
        return kExitUsage;
    }
    try {
        std::vector<DataMatrix> groups;
        for (const auto& f : cmd.files) groups.push_back(read_csv_file(f, cmd.header));
        const auto problem = KSampleProblem::one_way(KSampleData(std::move(groups)));
        const auto plan = cmd.block_size > 0
                              ? PermutationPlan::block(make_blocks_for(problem.n(), cmd.block_size), cmd.permutations,
                                                       cmd.seed)
                              : PermutationPlan::plain(problem.n(), cmd.permutations, cmd.seed);
        TestOptions options;
        options.forest.trees = cmd.trees;
        options.forest_seed = derive_seed(cmd.seed, 2);
        const auto res = run_test(cmd.test, problem, plan, options);
        const nlohmann::json j{{"test", cmd.test},
                               {"statistic", res.statistic},
                               {"p_value", res.p_value},
                               {"permutations", res.replicates},
                               {"seed", res.seed},
                               {"n", problem.n()},
                               {"k", problem.k()},
                               {"permutation", cmd.block_size > 0 ? "block" : "plain"}};
        out << j.dump(2) << '\n';
        return kExitOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

struct PowerCommand {
    std::string spec_path;
    std::string out;  // overrides the spec's output path when set
    std::optional<std::size_t> reps;
    std::optional<std::size_t> permutations;
    std::optional<double> alpha;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trees;
};

inline int cmd_power(const PowerCommand& cmd, std::ostream& out, std::ostream& err) {
    try {
        std::ifstream in(cmd.spec_path);
        if (!in) throw InputError("cannot open " + cmd.spec_path);
        std::stringstream text;
        text << in.rdbuf();
        auto spec = parse_benchmark_spec(text.str());
        if (!cmd.out.empty()) spec.out = cmd.out;
        if (cmd.reps) spec.reps = *cmd.reps;
        if (cmd.permutations) spec.permutations = *cmd.permutations;
        if (cmd.alpha) spec.alpha = *cmd.alpha;
        if (cmd.seed) spec.seed = *cmd.seed;
        if (cmd.trees) spec.trees = *cmd.trees;
        spec.validate();
        const auto rows = run_power(spec);
        if (spec.out.empty()) {
            write_power_csv(out, rows);
            return kExitOk;
        }
        std::ofstream csv(spec.out);
        if (!csv) throw InputError("cannot write " + spec.out);
        write_power_csv(csv, rows);
        std::ofstream sidecar(spec.out + ".json");
        if (!sidecar) throw InputError("cannot write " + spec.out + ".json");
        sidecar << nlohmann::json(spec).dump(2) << '\n';
        out << nlohmann::json{{"rows", rows.size()}, {"csv", spec.out}, {"spec", spec.out + ".json"}}.dump(2) << '\n';
        return kExitOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

inline int cmd_check_theorems(std::size_t trials, std::uint64_t seed, std::ostream& out, std::ostream& err) {
    if (trials < 1) {
        err << "check-theorems needs at least one trial\n";
        return kExitUsage;
    }
    try {
        const auto report = check_theorems(trials, seed);
        out << report_json(report).dump(2) << '\n';
        return report.ok() ? kExitOk : kExitTheorem;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

struct SimulateCommand {
    std::string simulation = "gaussian_one_diff";
    std::map<std::string, double> params;
    std::uint64_t seed = 0;
    std::string out;  // prefix; group g is written to <out>_g<g>.csv
};

inline int cmd_simulate(const SimulateCommand& cmd, std::ostream& out, std::ostream& err) {
    try {
        BenchmarkSpec spec;
        spec.tests = {"dcorr"};
        spec.simulation = cmd.simulation;
        spec.params = cmd.params;
        spec.sweep_param = "epsilon";
        spec.sweep_values = {cmd.params.count("epsilon") ? cmd.params.at("epsilon") : 0.0};
        spec.validate();
        const auto ds = generate_dataset(spec, spec.sweep_values.front(), cmd.seed);
        nlohmann::json files = nlohmann::json::array();
        for (std::size_t g = 0; g < ds.data.k(); ++g) {
            if (cmd.out.empty()) {
                out << "# group " << g << '\n';
                write_csv(out, ds.data.groups[g]);
                continue;
            }
            const std::string path = cmd.out + "_g" + std::to_string(g) + ".csv";
            std::ofstream f(path);
            if (!f) throw InputError("cannot write " + path);
            write_csv(f, ds.data.groups[g]);
            files.push_back(path);
        }
        if (!cmd.out.empty()) {
            nlohmann::json j{{"simulation", cmd.simulation}, {"seed", cmd.seed}, {"files", files}};
            if (ds.blocks) j["block_size"] = ds.blocks->block_size;
            out << j.dump(2) << '\n';
        }
        return kExitOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace ksample
