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
#ifndef DLMPC_CONTROLLER_HPP
#define DLMPC_CONTROLLER_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dlmpc/admm.hpp"
#include "dlmpc/fhocp.hpp"
#include "dlmpc/model.hpp"
#include "dlmpc/safeset.hpp"

namespace dlmpc {

/// Plain receding-horizon controller used to produce the first feasible trajectory.
struct BootstrapSettings {
    int horizon = 15;
    /// Multiplies the task state weight.
    double state_weight = 0.01;
    /// Adds the own terminal state to the stage-cost sum.
    bool terminal_cost = true;
    int max_time_steps = 400;
    /// Shifted warm starts across time steps. Off by default: with the small
    /// state weight the absolute consensus tolerance is loose relative to the
    /// cost scale and warm-started runs can stop short near the target.
    bool shift_warm_start = false;
};

struct RunConfig {
    int horizon = 4;
    int iterations = 10;
    ConsensusSettings consensus;
    double convergence_epsilon = 1e-3;
    int max_time_steps = 200;
    RetentionPolicy retention;
    std::uint64_t seed = 0;
    BootstrapSettings bootstrap;
    /// Start each time step from the shifted previous plan instead of isolated solves.
    bool shift_warm_start = true;

    void validate() const;
};

/// Per-time-step summary kept in an IterationRecord.
struct StepSummary {
    int time_step = 0;
    ConsensusReport report;
    /// Sum of the local optimal costs at this time step.
    double fhocp_cost = 0.0;
    /// Realized stage cost h(x_t, u_t).
    double stage_cost = 0.0;
};

struct IterationRecord {
    int iteration = 0;
    /// Global states x_0 .. x_T (x_T snapped to the target) and inputs u_0 .. u_T (u_T = 0).
    std::vector<Vector> states;
    std::vector<Vector> inputs;
    /// stage_costs[t][i]
    std::vector<std::vector<double>> stage_costs;
    std::vector<double> subsystem_costs;
    double cost = 0.0;
    std::vector<StepSummary> steps;
    bool converged = false;
    /// Some time step ended with ADMM at its iteration limit.
    bool flagged = false;
    double max_state_violation = 0.0;
    double max_input_violation = 0.0;
    double wall_time = 0.0;

    int length() const { return static_cast<int>(states.size()) - 1; }
};

struct TimeStepResult {
    Vector input;
    Vector next_state;
    std::vector<Vector> solutions;
    ConsensusReport report;
    double fhocp_cost = 0.0;
};

/**
 * @brief Distributed closed-loop controller
 *
 * Holds the plant, the run configuration and a message transport. Local
 * problems are rebuilt whenever the safe-set data change and otherwise only
 * receive the new measured state.
 */
class Controller {
public:
    Controller(const PartitionedSystem& system, RunConfig config, std::shared_ptr<Transport> transport = nullptr);

    const RunConfig& config() const { return config_; }
    const PartitionedSystem& system() const { return system_; }

    /// One consensus solve from state x and one plant step. Throws RecursiveFeasibilityError.
    TimeStepResult run_time_step(const Vector& x, const SafeSetStore& store,
                                 const ConsensusStart* warm_start = nullptr);

    /// Closed-loop run from x_start; commits the trajectory to the store on success.
    /// Throws IterationDidNotConverge.
    IterationRecord run_iteration(int iteration_id, const Vector& x_start, SafeSetStore& store);

    /// Bootstrap run without terminal set. Throws BootstrapFailed.
    IterationRecord bootstrap(const Vector& x_start);

    /// Builds the local problems used at state x (exposed for oracle checks).
    std::vector<LocalFhocp> local_problems(const Vector& x, const SafeSetStore* store, const FhocpOptions& options) const;

private:
    IterationRecord closed_loop(int iteration_id, const Vector& x_start, const SafeSetStore* store,
                                const FhocpOptions& options, int max_steps, bool shift_warm_start);

    const PartitionedSystem& system_;
    RunConfig config_;
    std::shared_ptr<Transport> transport_;
};

/// Runs the bootstrap controller from the plant's start state.
IterationRecord bootstrap_feasible(const PartitionedSystem& system, const RunConfig& config);

/// Checks that a recorded trajectory obeys dynamics and constraints and reaches the target.
/// Throws InvalidTrajectory or NotConverged.
void validate_trajectory(const PartitionedSystem& system, const IterationRecord& record, double convergence_epsilon,
                         double tolerance = 1e-7);

/// Adds a validated record to the store.
void ingest(const PartitionedSystem& system, const IterationRecord& record, SafeSetStore& store);

/// Runs learning iterations first_id, first_id + 1, ... (config.iterations of them) from the
/// plant's start state. The store must already contain a successful trajectory.
std::vector<IterationRecord> run_iterations(const PartitionedSystem& system, SafeSetStore& store,
                                            const RunConfig& config, int first_id = 1,
                                            std::shared_ptr<Transport> transport = nullptr);

struct TaskResult {
    /// Initial records followed by one record per learning iteration.
    std::vector<IterationRecord> records;
    SafeSetStore store;
};

/// Validates and stores the initial trajectories, then runs config.iterations iterations.
TaskResult run_task(const PartitionedSystem& system, const std::vector<IterationRecord>& initial,
                    const RunConfig& config, std::shared_ptr<Transport> transport = nullptr);

/// Rebuilds global records from the trajectories kept in a store, in iteration order.
std::vector<IterationRecord> records_from_store(const PartitionedSystem& system, const SafeSetStore& store);

struct OracleResult {
    double cost = 0.0;
    QpStatus status = QpStatus::MaxIter;
    Vector first_input;
};

/// Centralized finite-horizon solve from x_start with terminal state fixed at the target.
OracleResult centralized_oracle(const PartitionedSystem& system, int horizon, const QpSettings& settings = {});

/// Empty store for the system's subsystems.
SafeSetStore make_store(const PartitionedSystem& system, const RunConfig& config);

/// Writes trajectories.csv, costs.csv and (optionally) admm.csv under `directory`.
void write_run_csv(const std::string& directory, const PartitionedSystem& system,
                   const std::vector<IterationRecord>& records, bool admm_diagnostics);

}  // namespace dlmpc

#endif  // DLMPC_CONTROLLER_HPP
