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
#include "dlmpc/controller.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <filesystem>

#include "dlmpc/csv.hpp"
#include "dlmpc/error.hpp"

namespace dlmpc {

void RunConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw Error(ErrorKind::Config, what);
    };
    require(horizon >= 1, "horizon must be at least 1");
    require(iterations >= 0, "iterations must be nonnegative");
    require(consensus.rho > 0.0, "rho must be positive");
    require(consensus.eps_consensus > 0.0, "eps_consensus must be positive");
    require(consensus.max_iter >= 1, "max ADMM iterations must be positive");
    require(convergence_epsilon > 0.0, "convergence_epsilon must be positive");
    require(max_time_steps >= 1, "max_time_steps must be positive");
    require(bootstrap.horizon >= 1, "bootstrap horizon must be at least 1");
    require(bootstrap.state_weight > 0.0, "bootstrap state weight must be positive");
    require(retention.kind == RetentionPolicy::Kind::KeepAll || retention.keep >= 1, "keep-last needs K >= 1");
}

namespace {

/// Shifts each agent's plan one step forward to warm-start the next time step.
std::vector<Vector> shift_plans(const std::vector<LocalFhocp>& problems, const std::vector<Vector>& plans,
                                const std::vector<LocalSystem>& locals, const SafeSetStore* store) {
    std::vector<Vector> out;
    out.reserve(plans.size());
    for (std::size_t i = 0; i < problems.size(); ++i) {
        const DecisionLayout& lay = problems[i].layout;
        const Vector& z = plans[i];
        Vector s = z;
        const int N = lay.horizon;
        const int nN = lay.neighborhood_dim;
        for (int k = 0; k + 1 < N; ++k) s.segment(lay.state(k, 0), nN) = z.segment(lay.state(k + 1, 0), nN);
        for (int r = 0; r < lay.state_dim; ++r) s(lay.own_state(N - 1, r)) = z(lay.own_state(N, r));
        for (int k = 0; k + 1 < N; ++k) s.segment(lay.input(k, 0), lay.input_dim) = z.segment(lay.input(k + 1, 0), lay.input_dim);
        s.segment(lay.input(N - 1, 0), lay.input_dim).setZero();
        if (lay.alpha_dim > 0 && store != nullptr) {
            Vector alpha = Vector::Zero(lay.alpha_dim);
            for (int k = 0; k < lay.alpha_dim; ++k) alpha(store->successor(k)) += z(lay.alpha.begin + k);
            s.segment(lay.alpha.begin, lay.alpha_dim) = alpha;
            const SafeSetData data = store->safe_set_matrix(static_cast<int>(i));
            const Vector terminal = data.D * alpha;
            for (int r = 0; r < lay.state_dim; ++r) s(lay.own_state(N, r)) = terminal(r);
        } else {
            const LocalSystem& L = locals[i];
            const Vector terminal = L.A_N * s.segment(lay.state(N - 1, 0), nN);
            for (int r = 0; r < lay.state_dim; ++r) s(lay.own_state(N, r)) = terminal(r);
        }
        out.push_back(std::move(s));
    }
    return out;
}

/// Shifts the per-step consensus duals like the plans; safe-set duals are kept.
EdgeDuals shift_duals(const std::vector<EdgeOverlap>& overlaps, const EdgeDuals& duals, int horizon, int alpha_dim) {
    EdgeDuals out = duals;
    for (std::size_t e = 0; e < overlaps.size(); ++e) {
        const auto len = static_cast<Eigen::Index>(overlaps[e].in_i.size());
        const Eigen::Index per_step = (len - alpha_dim) / horizon;
        for (Vector* v : {&out[e].first, &out[e].second}) {
            const Vector old = *v;
            for (int k = 0; k + 1 < horizon; ++k) v->segment(k * per_step, per_step) = old.segment((k + 1) * per_step, per_step);
        }
    }
    return out;
}

}  // namespace

Controller::Controller(const PartitionedSystem& system, RunConfig config, std::shared_ptr<Transport> transport)
    : system_(system), config_(std::move(config)), transport_(std::move(transport)) {
    config_.validate();
    if (!transport_) transport_ = std::make_shared<SynchronousTransport>();
}

std::vector<LocalFhocp> Controller::local_problems(const Vector& x, const SafeSetStore* store,
                                                   const FhocpOptions& options) const {
    std::vector<LocalFhocp> problems;
    problems.reserve(system_.locals.size());
    for (const auto& L : system_.locals) {
        std::optional<SafeSetData> data;
        if (options.terminal_set) {
            if (store == nullptr) throw Error(ErrorKind::EmptySafeSet, "terminal set requested without a store");
            data = store->safe_set_matrix(L.index);
        }
        problems.push_back(build_local(L, data ? &*data : nullptr, select(x, L.neighborhood), options));
    }
    return problems;
}

TimeStepResult Controller::run_time_step(const Vector& x, const SafeSetStore& store,
                                         const ConsensusStart* warm_start) {
    FhocpOptions options;
    options.horizon = config_.horizon;
    auto problems = local_problems(x, &store, options);
    const auto overlaps = edge_overlaps(problems, system_.partition);
    auto res = run_consensus(problems, overlaps, config_.consensus, *transport_, warm_start);
    if (res.report.status == ConsensusStatus::LocalInfeasible) {
        throw RecursiveFeasibilityError(res.report.failed_agent, "local problem infeasible");
    }
    std::vector<Vector> inputs;
    for (std::size_t i = 0; i < problems.size(); ++i) inputs.push_back(extract_input(res.solutions[i], problems[i].layout));
    TimeStepResult out;
    out.input = assemble_inputs(system_.partition, inputs);
    out.next_state = step(system_.global, x, out.input);
    out.fhocp_cost = res.report.objectives.back();
    out.solutions = std::move(res.solutions);
    out.report = std::move(res.report);
    return out;
}

IterationRecord Controller::closed_loop(int iteration_id, const Vector& x_start, const SafeSetStore* store,
                                        const FhocpOptions& options, int max_steps, bool shift_warm_start) {
    const auto started = std::chrono::steady_clock::now();
    const GlobalSystem& g = system_.global;
    IterationRecord rec;
    rec.iteration = iteration_id;
    rec.states.push_back(x_start);

    auto problems = local_problems(x_start, store, options);
    const auto overlaps = edge_overlaps(problems, system_.partition);
    std::optional<ConsensusResult> previous;

    Vector x = x_start;
    for (int t = 0;; ++t) {
        if ((x - g.x_target).norm() <= config_.convergence_epsilon) {
            rec.converged = true;
            break;
        }
        if (t >= max_steps) break;
        for (auto& p : problems) set_initial_state(p, select(x, p.neighborhood));
        std::optional<ConsensusStart> warm;
        if (shift_warm_start && previous) {
            warm = ConsensusStart{shift_plans(problems, previous->solutions, system_.locals, store),
                                  shift_duals(overlaps, previous->duals, options.horizon,
                                              problems.front().layout.alpha_dim)};
        }
        auto res = run_consensus(problems, overlaps, config_.consensus, *transport_, warm ? &*warm : nullptr);
        if (res.report.status == ConsensusStatus::LocalInfeasible) {
            throw RecursiveFeasibilityError(res.report.failed_agent, "local problem infeasible at time step " +
                                                                         std::to_string(t) + " of iteration " +
                                                                         std::to_string(iteration_id));
        }
        if (res.report.status == ConsensusStatus::MaxIter) {
            rec.flagged = true;
            spdlog::warn("iteration {} step {}: consensus stopped at the iteration limit (residual {:.3e})",
                         iteration_id, t, res.report.final_residual());
        }
        std::vector<Vector> parts;
        for (std::size_t i = 0; i < problems.size(); ++i) parts.push_back(extract_input(res.solutions[i], problems[i].layout));
        const Vector u = assemble_inputs(system_.partition, parts);
        const Vector x_next = step(g, x, u);

        StepSummary s;
        s.time_step = t;
        s.fhocp_cost = res.report.objectives.back();
        s.stage_cost = stage_cost(system_, x, u).total;
        spdlog::debug("iteration {} step {}: {} rounds, residual {:.2e}, cost {:.6f}", iteration_id, t,
                      res.report.iterations, res.report.final_residual(), s.fhocp_cost);
        s.report = res.report;
        rec.steps.push_back(std::move(s));

        rec.max_input_violation = std::max(rec.max_input_violation, input_violation(g, u));
        rec.max_state_violation = std::max(rec.max_state_violation, state_violation(g, x_next));
        rec.inputs.push_back(u);
        rec.states.push_back(x_next);
        previous = std::move(res);
        x = x_next;
    }
    if (!rec.converged) {
        throw Error(ErrorKind::IterationDidNotConverge,
                    "iteration " + std::to_string(iteration_id) + " did not reach the target within " +
                        std::to_string(max_steps) + " steps");
    }

    rec.states.back() = g.x_target;
    rec.inputs.push_back(Vector::Zero(g.input_dim()));
    const int M = system_.size();
    rec.subsystem_costs.assign(static_cast<std::size_t>(M), 0.0);
    for (std::size_t t = 0; t < rec.states.size(); ++t) {
        const auto h = stage_cost(system_, rec.states[t], rec.inputs[t]);
        rec.stage_costs.push_back(h.per_subsystem);
        for (int i = 0; i < M; ++i) rec.subsystem_costs[static_cast<std::size_t>(i)] += h.per_subsystem[static_cast<std::size_t>(i)];
    }
    for (double c : rec.subsystem_costs) rec.cost += c;
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    spdlog::info("iteration {}: cost {:.4f} over {} steps ({:.2f} s)", iteration_id, rec.cost, rec.length(),
                 rec.wall_time);
    return rec;
}

IterationRecord Controller::run_iteration(int iteration_id, const Vector& x_start, SafeSetStore& store) {
    FhocpOptions options;
    options.horizon = config_.horizon;
    IterationRecord rec = closed_loop(iteration_id, x_start, &store, options, config_.max_time_steps, config_.shift_warm_start);
    // Realized states inherit the consensus tolerance through the applied inputs.
    validate_trajectory(system_, rec, config_.convergence_epsilon, 10.0 * config_.consensus.eps_consensus + 1e-7);
    ingest(system_, rec, store);
    return rec;
}

IterationRecord Controller::bootstrap(const Vector& x_start) {
    FhocpOptions options;
    options.horizon = config_.bootstrap.horizon;
    options.terminal_set = false;
    options.state_scale = config_.bootstrap.state_weight;
    options.terminal_weight = config_.bootstrap.terminal_cost ? 1.0 : 0.0;
    try {
        IterationRecord rec = closed_loop(0, x_start, nullptr, options, config_.bootstrap.max_time_steps,
                                          config_.bootstrap.shift_warm_start);
        validate_trajectory(system_, rec, config_.convergence_epsilon, 10.0 * config_.consensus.eps_consensus + 1e-7);
        return rec;
    } catch (const Error& e) {
        throw Error(ErrorKind::BootstrapFailed, e.what());
    }
}

IterationRecord bootstrap_feasible(const PartitionedSystem& system, const RunConfig& config) {
    Controller c(system, config);
    return c.bootstrap(system.global.x_start);
}

void validate_trajectory(const PartitionedSystem& system, const IterationRecord& record, double convergence_epsilon,
                         double tolerance) {
    const GlobalSystem& g = system.global;
    if (record.states.empty() || record.states.size() != record.inputs.size()) {
        throw Error(ErrorKind::InvalidTrajectory, "a trajectory needs one input per state");
    }
    const std::size_t T = record.states.size() - 1;
    for (std::size_t t = 0; t <= T; ++t) {
        if (record.states[t].size() != g.state_dim() || record.inputs[t].size() != g.input_dim()) {
            throw Error(ErrorKind::DimensionMismatch, "trajectory sample has wrong size");
        }
        if (state_violation(g, record.states[t]) > tolerance) {
            throw Error(ErrorKind::InvalidTrajectory, "state constraints violated at t = " + std::to_string(t));
        }
        if (input_violation(g, record.inputs[t]) > tolerance) {
            throw Error(ErrorKind::InvalidTrajectory, "input constraints violated at t = " + std::to_string(t));
        }
        if (t < T) {
            const Vector next = step(g, record.states[t], record.inputs[t]);
            const double gap = (next - record.states[t + 1]).norm();
            // The final sample is snapped to the target.
            const double allowed = t + 1 == T ? convergence_epsilon : tolerance * (1.0 + next.norm());
            if (gap > allowed) {
                throw Error(ErrorKind::InvalidTrajectory, "dynamics violated at t = " + std::to_string(t));
            }
        }
    }
    if ((record.states.back() - g.x_target).norm() > convergence_epsilon) {
        throw Error(ErrorKind::NotConverged, "trajectory does not end at the target");
    }
}

void ingest(const PartitionedSystem& system, const IterationRecord& record, SafeSetStore& store) {
    const int M = system.size();
    for (int i = 0; i < M; ++i) {
        const LocalSystem& L = system.locals[static_cast<std::size_t>(i)];
        std::vector<Vector> xs, us;
        std::vector<double> hs;
        for (std::size_t t = 0; t < record.states.size(); ++t) {
            xs.push_back(select(record.states[t], L.states));
            us.push_back(select(record.inputs[t], L.inputs));
            hs.push_back(local_stage_cost(L, select(record.states[t], L.neighborhood), us.back()));
        }
        store.add_trajectory(i, record.iteration, xs, us, hs);
    }
}

std::vector<IterationRecord> records_from_store(const PartitionedSystem& system, const SafeSetStore& store) {
    const int M = system.size();
    std::vector<IterationRecord> out;
    for (int id : store.iterations()) {
        std::vector<const StoredTrajectory*> parts;
        for (int i = 0; i < M; ++i) {
            for (const auto& tr : store.trajectories(i))
                if (tr.iteration_id == id) parts.push_back(&tr);
        }
        if (static_cast<int>(parts.size()) != M) throw Error(ErrorKind::RegistryMismatch, "incomplete stored iteration");
        IterationRecord rec;
        rec.iteration = id;
        rec.converged = true;
        rec.subsystem_costs.assign(static_cast<std::size_t>(M), 0.0);
        for (std::size_t t = 0; t < parts.front()->states.size(); ++t) {
            std::vector<Vector> xs, us;
            for (int i = 0; i < M; ++i) {
                const auto& tr = *parts[static_cast<std::size_t>(i)];
                xs.push_back(tr.states[t]);
                const Vector& u = tr.inputs[t];
                us.push_back(u.size() == 0 ? Vector::Zero(system.partition.block(i).input_count) : u);
            }
            rec.states.push_back(assemble_states(system.partition, xs));
            rec.inputs.push_back(assemble_inputs(system.partition, us));
            const auto h = stage_cost(system, rec.states.back(), rec.inputs.back());
            rec.stage_costs.push_back(h.per_subsystem);
            for (int i = 0; i < M; ++i) rec.subsystem_costs[static_cast<std::size_t>(i)] += h.per_subsystem[static_cast<std::size_t>(i)];
        }
        for (double c : rec.subsystem_costs) rec.cost += c;
        out.push_back(std::move(rec));
    }
    return out;
}

OracleResult centralized_oracle(const PartitionedSystem& system, int horizon, const QpSettings& settings) {
    RunConfig config;
    SafeSetStore store = make_store(system, config);
    store.seed_with_targets(0);
    FhocpOptions options;
    options.horizon = horizon;
    const LocalFhocp problem = build_centralized(system, store, system.global.x_start, options);
    const QpSolution sol = solve(problem.qp, std::nullopt, settings);
    OracleResult out;
    out.status = sol.status;
    out.cost = problem.objective(sol.z);
    out.first_input = extract_input(sol.z, problem.layout);
    return out;
}

SafeSetStore make_store(const PartitionedSystem& system, const RunConfig& config) {
    std::vector<Vector> targets;
    for (const auto& L : system.locals) targets.push_back(L.x_target);
    SafeSetOptions opts;
    opts.convergence_epsilon = config.convergence_epsilon;
    opts.retention = config.retention;
    return SafeSetStore(targets, opts);
}

std::vector<IterationRecord> run_iterations(const PartitionedSystem& system, SafeSetStore& store,
                                            const RunConfig& config, int first_id,
                                            std::shared_ptr<Transport> transport) {
    if (store.empty()) throw Error(ErrorKind::EmptySafeSet, "run needs at least one stored trajectory");
    Controller controller(system, config, std::move(transport));
    std::vector<IterationRecord> out;
    for (int q = 0; q < config.iterations; ++q) {
        out.push_back(controller.run_iteration(first_id + q, system.global.x_start, store));
    }
    return out;
}

TaskResult run_task(const PartitionedSystem& system, const std::vector<IterationRecord>& initial,
                    const RunConfig& config, std::shared_ptr<Transport> transport) {
    config.validate();
    TaskResult result{{}, make_store(system, config)};
    int next_id = 0;
    for (const auto& rec : initial) {
        validate_trajectory(system, rec, config.convergence_epsilon, 10.0 * config.consensus.eps_consensus + 1e-7);
        ingest(system, rec, result.store);
        result.records.push_back(rec);
        next_id = std::max(next_id, rec.iteration + 1);
    }
    auto runs = run_iterations(system, result.store, config, std::max(next_id, 1), std::move(transport));
    for (auto& r : runs) result.records.push_back(std::move(r));
    return result;
}

void write_run_csv(const std::string& directory, const PartitionedSystem& system,
                   const std::vector<IterationRecord>& records, bool admm_diagnostics) {
    std::filesystem::create_directories(directory);
    const int M = system.size();
    int max_n = 0, max_m = 0;
    for (int i = 0; i < M; ++i) {
        max_n = std::max(max_n, system.partition.block(i).state_count);
        max_m = std::max(max_m, system.partition.block(i).input_count);
    }
    {
        std::vector<std::string> header{"iteration", "t", "subsystem"};
        for (int k = 0; k < max_n; ++k) header.push_back("x" + std::to_string(k + 1));
        for (int k = 0; k < max_m; ++k) header.push_back("u" + std::to_string(k + 1));
        CsvWriter csv(directory + "/trajectories.csv", header);
        for (const auto& rec : records) {
            for (std::size_t t = 0; t < rec.states.size(); ++t) {
                for (int i = 0; i < M; ++i) {
                    const auto& L = system.locals[static_cast<std::size_t>(i)];
                    csv.cell(rec.iteration).cell(static_cast<int>(t)).cell(i + 1);
                    for (int k = 0; k < max_n; ++k) {
                        if (k < L.state_dim()) csv.cell(rec.states[t](L.states[static_cast<std::size_t>(k)]));
                        else csv.blank();
                    }
                    for (int k = 0; k < max_m; ++k) {
                        if (k < L.input_dim()) csv.cell(rec.inputs[t](L.inputs[static_cast<std::size_t>(k)]));
                        else csv.blank();
                    }
                    csv.end_row();
                }
            }
        }
    }
    {
        CsvWriter csv(directory + "/costs.csv", {"iteration", "scope", "cost"});
        for (const auto& rec : records) {
            csv.cell(rec.iteration).cell(std::string("global")).cell(rec.cost);
            csv.end_row();
            for (int i = 0; i < M; ++i) {
                csv.cell(rec.iteration).cell(std::to_string(i + 1)).cell(rec.subsystem_costs[static_cast<std::size_t>(i)]);
                csv.end_row();
            }
        }
    }
    if (admm_diagnostics) {
        std::vector<std::string> edge_names;
        for (int i = 0; i < M; ++i)
            for (int j : system.partition.neighbors(i))
                if (j > i) edge_names.push_back(std::to_string(i + 1) + "-" + std::to_string(j + 1));
        CsvWriter csv(directory + "/admm.csv", {"iteration", "time_step", "admm_iter", "edge", "residual", "global_objective"});
        for (const auto& rec : records) {
            for (const auto& s : rec.steps) {
                const auto& r = s.report;
                for (std::size_t k = 0; k < r.residuals.size(); ++k) {
                    for (std::size_t e = 0; e < r.residuals[k].size(); ++e) {
                        csv.cell(rec.iteration).cell(s.time_step).cell(static_cast<int>(k)).cell(edge_names.at(e));
                        csv.cell(r.residuals[k][e]).cell(r.objectives[k]);
                        csv.end_row();
                    }
                }
            }
        }
    }
}

}  // namespace dlmpc
