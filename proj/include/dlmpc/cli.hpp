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
#ifndef DLMPC_CLI_HPP
#define DLMPC_CLI_HPP

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dlmpc/config.hpp"

namespace dlmpc {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 1,
    kExitFailure = 2,
};

struct ReproRow {
    std::string item;
    double expected = 0.0;
    double produced = 0.0;
    /// Allowed |produced - expected| / |expected| when relative, else absolute bound on produced.
    double tolerance = 0.0;
    bool relative = true;
    bool pass = false;
};

struct ReproReport {
    std::vector<ReproRow> rows;
    std::optional<ExploreResult> exploration;
    std::vector<IterationRecord> task;
    OracleResult oracle;
    bool all_pass() const;
};

/// Reference iteration costs 0..10 of the bundled three-subsystem task.
const std::vector<double>& reference_iteration_costs();

/**
 * Runs exploration (when configured), bootstrap, the learning iterations and
 * the centralized oracle, writes their CSV files under `directory` and
 * compares the numbers with the reference costs.
 */
ReproReport full_repro(const ExperimentConfig& config, const std::string& directory);

/// Writes the report as CSV and prints it as a table.
void write_report(const ReproReport& report, const std::string& path, std::ostream& out);

/// Command-line entry point: dlmpc <bootstrap|explore|task|oracle|repro> --config <file> [options].
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dlmpc

#endif  // DLMPC_CLI_HPP
