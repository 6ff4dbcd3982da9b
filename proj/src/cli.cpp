/*
 Copyright 2026 The dlmpc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#include "dlmpc/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>

#include "dlmpc/csv.hpp"
#include "dlmpc/error.hpp"

namespace dlmpc {

namespace {

void setup_logging() {
    auto logger = spdlog::get("dlmpc");
    if (!logger) {
        logger = spdlog::stderr_color_mt("dlmpc");
        spdlog::set_default_logger(logger);
    }
    const char* env = std::getenv("DLMPC_LOG");
    spdlog::set_level(env != nullptr ? spdlog::level::from_str(env) : spdlog::level::warn);
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config:
        case ErrorKind::InvalidSystem:
        case ErrorKind::DimensionMismatch:
        case ErrorKind::ConstraintRowUnassignable:
        case ErrorKind::DisconnectedGraph:
            return kExitConfig;
        default:
            return kExitFailure;
    }
}

void print_cost_table(const PartitionedSystem& system, const std::vector<IterationRecord>& records, std::ostream& out) {
    const int M = system.size();
    out << std::setw(9) << "iteration" << std::setw(12) << "global";
    for (int i = 0; i < M; ++i) out << std::setw(12) << ("J" + std::to_string(i + 1));
    out << std::setw(8) << "steps" << '\n';
    out << std::fixed << std::setprecision(2);
    for (const auto& r : records) {
        out << std::setw(9) << r.iteration << std::setw(12) << r.cost;
        for (double c : r.subsystem_costs) out << std::setw(12) << c;
        out << std::setw(8) << r.length() << (r.flagged ? "  (ADMM iteration limit)" : "") << '\n';
    }
    out.unsetf(std::ios::floatfield);
}

void write_snapshot(const SafeSetStore& store, const std::string& directory) {
    std::filesystem::create_directories(directory);
    store.save(directory + "/safeset.json");
}

SafeSetStore store_with(const PartitionedSystem& system, const RunConfig& run,
                        const std::vector<IterationRecord>& records) {
    SafeSetStore store = make_store(system, run);
    for (const auto& r : records) ingest(system, r, store);
    return store;
}

}  // namespace

bool ReproReport::all_pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const ReproRow& r) { return r.pass; });
}

const std::vector<double>& reference_iteration_costs() {
    static const std::vector<double> costs{295.63, 216.96, 216.41, 216.31, 216.28, 216.26,
                                           216.26, 216.25, 216.25, 216.25, 216.25};
    return costs;
}

ReproReport full_repro(const ExperimentConfig& config, const std::string& directory) {
    ReproReport report;
    auto relative_row = [&](std::string item, double expected, double produced, double tol) {
        const bool pass = std::abs(produced - expected) <= tol * std::abs(expected);
        report.rows.push_back({std::move(item), expected, produced, tol, true, pass});
    };
    auto bound_row = [&](std::string item, double expected, double produced, double bound) {
        report.rows.push_back({std::move(item), expected, produced, bound, false, produced <= bound});
    };

    if (config.explore) {
        const ExploreResult ex = enlarge_domain(config.system, *config.explore, config.run);
        write_explore_csv(directory + "/explore", config.system, ex);
        write_run_csv(directory + "/explore", config.system, ex.records(), config.admm_diagnostics);
        write_snapshot(ex.store, directory + "/explore");
        bound_row("exploration rounds", 4.0, ex.complete ? static_cast<double>(ex.rounds.size()) : INFINITY, 6.0);
        report.exploration = ex;
    }

    const IterationRecord boot = bootstrap_feasible(config.system, config.run);
    const TaskResult task = run_task(config.system, {boot}, config.run);
    write_run_csv(directory + "/task", config.system, task.records, config.admm_diagnostics);
    write_snapshot(task.store, directory + "/task");

    const auto& ref = reference_iteration_costs();
    int flagged = 0;
    for (const auto& r : task.records) {
        const auto q = static_cast<std::size_t>(r.iteration);
        if (r.flagged) ++flagged;
        if (q < ref.size()) relative_row("iteration " + std::to_string(q) + " cost", ref[q], r.cost, q == 0 ? 0.02 : 0.01);
    }
    bound_row("flagged iterations", 0.0, flagged, 0.0);

    const OracleResult oracle = centralized_oracle(config.system, config.oracle_horizon);
    relative_row("centralized optimum", ref.back(), oracle.cost, 0.01);
    relative_row("last iteration vs centralized optimum", oracle.cost, task.records.back().cost, 0.005);
    report.task = task.records;
    report.oracle = oracle;
    return report;
}

void write_report(const ReproReport& report, const std::string& path, std::ostream& out) {
    CsvWriter csv(path, {"item", "expected", "produced", "tolerance", "kind", "pass"});
    out << std::left << std::setw(40) << "item" << std::right << std::setw(12) << "expected" << std::setw(12)
        << "produced" << std::setw(12) << "tolerance" << "  result\n";
    for (const auto& r : report.rows) {
        csv.cell(r.item).cell(r.expected).cell(r.produced).cell(r.tolerance);
        csv.cell(std::string(r.relative ? "relative" : "upper_bound")).cell(std::string(r.pass ? "pass" : "fail"));
        csv.end_row();
        out << std::left << std::setw(40) << r.item << std::right << std::fixed << std::setprecision(4)
            << std::setw(12) << r.expected << std::setw(12) << r.produced << std::setw(12) << r.tolerance
            << (r.relative ? " rel" : " max") << "  " << (r.pass ? "PASS" : "FAIL") << '\n';
        out.unsetf(std::ios::floatfield);
    }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    setup_logging();
    CLI::App app{"Distributed learning model predictive control"};
    app.require_subcommand(1);

    std::string config_path, out_dir, initial;
    std::optional<int> horizon, iterations;
    std::optional<double> rho, eps_consensus;
    std::optional<std::uint64_t> seed;
    bool diagnostics = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment config (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--horizon", horizon, "prediction horizon");
        sub->add_option("--iterations", iterations, "learning iterations");
        sub->add_option("--rho", rho, "ADMM penalty");
        sub->add_option("--eps-consensus", eps_consensus, "ADMM consensus tolerance");
        sub->add_option("--seed", seed, "random seed");
        sub->add_flag("--diagnostics", diagnostics, "write admm.csv");
    };
    CLI::App* boot = app.add_subcommand("bootstrap", "first feasible trajectory from the start state");
    CLI::App* explore = app.add_subcommand("explore", "enlarge the stored data toward the configured targets");
    CLI::App* task = app.add_subcommand("task", "bootstrap (or load) data and run the learning iterations");
    CLI::App* oracle = app.add_subcommand("oracle", "centralized finite-horizon solve from the start state");
    CLI::App* repro = app.add_subcommand("repro", "full reproduction run with a pass/fail report");
    for (CLI::App* sub : {boot, explore, task, oracle, repro}) add_common(sub);
    task->add_option("--initial", initial, "safe-set snapshot whose trajectories seed the run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "dlmpc: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        ExperimentConfig cfg = load_config(config_path);
        if (horizon) cfg.run.horizon = *horizon;
        if (oracle->parsed() && horizon) cfg.oracle_horizon = *horizon;
        if (iterations) cfg.run.iterations = *iterations;
        if (rho) cfg.run.consensus.rho = *rho;
        if (eps_consensus) cfg.run.consensus.eps_consensus = *eps_consensus;
        if (seed) cfg.run.seed = *seed;
        if (diagnostics) cfg.admm_diagnostics = true;
        cfg.run.validate();
        const std::string dir = out_dir.empty() ? cfg.output_directory : out_dir;
        const PartitionedSystem& system = cfg.system;

        if (boot->parsed()) {
            const IterationRecord rec = bootstrap_feasible(system, cfg.run);
            write_run_csv(dir, system, {rec}, cfg.admm_diagnostics);
            write_snapshot(store_with(system, cfg.run, {rec}), dir);
            print_cost_table(system, {rec}, out);
        } else if (explore->parsed()) {
            if (!cfg.explore) throw Error(ErrorKind::Config, "config has no 'explore' section");
            const ExploreResult ex = enlarge_domain(system, *cfg.explore, cfg.run);
            write_explore_csv(dir, system, ex);
            write_run_csv(dir, system, ex.records(), cfg.admm_diagnostics);
            write_snapshot(ex.store, dir);
            print_cost_table(system, ex.records(), out);
            if (!ex.complete) {
                throw Error(ErrorKind::RoundBudgetExhausted, "targets not reached within " +
                                                                 std::to_string(cfg.explore->max_rounds) + " rounds");
            }
            out << "targets reached after " << ex.rounds.size() << " rounds\n";
        } else if (task->parsed()) {
            std::vector<IterationRecord> seed_records;
            if (initial.empty()) seed_records.push_back(bootstrap_feasible(system, cfg.run));
            else seed_records = records_from_store(system, SafeSetStore::load(initial));
            const TaskResult result = run_task(system, seed_records, cfg.run);
            write_run_csv(dir, system, result.records, cfg.admm_diagnostics);
            write_snapshot(result.store, dir);
            print_cost_table(system, result.records, out);
        } else if (oracle->parsed()) {
            const OracleResult res = centralized_oracle(system, cfg.oracle_horizon);
            if (res.status != QpStatus::Optimal) {
                throw Error(ErrorKind::NotConverged, std::string("centralized solve ended with status ") +
                                                         to_string(res.status));
            }
            std::filesystem::create_directories(dir);
            CsvWriter csv(dir + "/oracle.csv", {"horizon", "cost"});
            csv.cell(cfg.oracle_horizon).cell(res.cost);
            csv.end_row();
            out << "centralized cost (N = " << cfg.oracle_horizon << "): " << std::fixed << std::setprecision(4)
                << res.cost << '\n';
        } else if (repro->parsed()) {
            const ReproReport report = full_repro(cfg, dir);
            write_report(report, dir + "/report.csv", out);
            out << (report.all_pass() ? "all checks passed\n" : "some checks failed\n");
        }
        return kExitOk;
    } catch (const Error& e) {
        err << "dlmpc: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "dlmpc: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace dlmpc
