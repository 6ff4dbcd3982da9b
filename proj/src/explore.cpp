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
#include "dlmpc/explore.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <limits>

#include "dlmpc/csv.hpp"
#include "dlmpc/error.hpp"
#include "dlmpc/qp.hpp"

namespace dlmpc {

void ExploreConfig::validate(const PartitionedSystem& system) const {
    if (targets.empty()) throw Error(ErrorKind::Config, "at least one exploration target is required");
    if (max_rounds < 1) throw Error(ErrorKind::Config, "max_rounds must be at least 1");
    if (!(epsilon > 0.0)) throw Error(ErrorKind::Config, "epsilon must be positive");
    for (const auto& target : targets) {
        if (static_cast<int>(target.size()) != system.size()) {
            throw Error(ErrorKind::Config, "each target needs one state per subsystem");
        }
        for (int i = 0; i < system.size(); ++i) {
            if (target[static_cast<std::size_t>(i)].size() != system.locals[static_cast<std::size_t>(i)].state_dim()) {
                throw Error(ErrorKind::DimensionMismatch, "target state has the wrong size");
            }
        }
        if (variant == ExplorationObjective::Kind::Quadratic &&
            state_violation(system.global, assemble_states(system.partition, target)) > 1e-9) {
            throw Error(ErrorKind::Config, "desired initial state violates the state constraints");
        }
    }
}

std::vector<IterationRecord> ExploreResult::records() const {
    std::vector<IterationRecord> out;
    for (const auto& r : rounds) out.push_back(r.record);
    return out;
}

double hull_distance(const Matrix& D, const Vector& point) {
    const auto K = D.cols();
    QuadraticProgram qp;
    qp.P = 2.0 * D.transpose() * D;
    qp.q = -2.0 * D.transpose() * point;
    qp.A_eq = Matrix::Ones(1, K);
    qp.b_eq = Vector::Ones(1);
    qp.A_in = -Matrix::Identity(K, K);
    qp.b_in = Vector::Zero(K);
    const QpSolution sol = solve(qp);
    if (sol.status == QpStatus::Infeasible) throw Error(ErrorKind::EmptySafeSet, "hull distance on an empty set");
    return (D * sol.z - point).norm();
}

std::vector<Vector> select_initial_states(const PartitionedSystem& system, const SafeSetStore& store,
                                          const std::vector<Vector>& objective, ExplorationObjective::Kind variant,
                                          const RunConfig& config, ConsensusReport* report) {
    if (static_cast<int>(objective.size()) != system.size()) {
        throw Error(ErrorKind::DimensionMismatch, "one exploration objective per subsystem expected");
    }
    FhocpOptions options;
    options.horizon = config.horizon;
    std::vector<LocalFhocp> problems;
    for (const auto& L : system.locals) {
        const SafeSetData data = store.safe_set_matrix(L.index);
        ExplorationObjective obj{variant, objective[static_cast<std::size_t>(L.index)]};
        if (variant == ExplorationObjective::Kind::Linear) obj.target = -obj.target;
        problems.push_back(build_exploration(L, data, obj, options));
    }
    const auto overlaps = edge_overlaps(problems, system.partition);
    SynchronousTransport transport;
    const auto res = run_consensus(problems, overlaps, config.consensus, transport);
    if (res.report.status == ConsensusStatus::LocalInfeasible) {
        throw RecursiveFeasibilityError(res.report.failed_agent, "exploration problem infeasible");
    }
    if (report != nullptr) *report = res.report;
    std::vector<Vector> out;
    for (std::size_t i = 0; i < problems.size(); ++i) {
        const DecisionLayout& lay = problems[i].layout;
        Vector x0(lay.state_dim);
        for (int r = 0; r < lay.state_dim; ++r) x0(r) = res.solutions[i](lay.own_state(0, r));
        out.push_back(std::move(x0));
    }
    return out;
}

ExploreResult enlarge_domain(const PartitionedSystem& system, const ExploreConfig& explore, const RunConfig& config,
                             std::shared_ptr<Transport> transport) {
    explore.validate(system);
    config.validate();
    const int M = system.size();
    const auto T = explore.targets.size();
    ExploreResult result{make_store(system, config), {}, false};
    result.store.seed_with_targets(0);
    Controller controller(system, config, std::move(transport));

    std::vector<bool> reached(T, false);
    for (int round = 1; round <= explore.max_rounds; ++round) {
        const auto k = static_cast<std::size_t>(round - 1) % T;
        RoundLog log;
        log.round = round;
        log.target = static_cast<int>(k);
        log.selected = select_initial_states(system, result.store, explore.targets[k], explore.variant, config);

        const Vector x_start = assemble_states(system.partition, log.selected);
        bool hit = true;
        for (int i = 0; i < M; ++i) {
            const auto& sel = log.selected[static_cast<std::size_t>(i)];
            const double d = explore.variant == ExplorationObjective::Kind::Quadratic
                                 ? (sel - explore.targets[k][static_cast<std::size_t>(i)]).squaredNorm()
                                 : std::numeric_limits<double>::quiet_NaN();
            log.distance.push_back(d);
            if (!(d <= explore.epsilon)) hit = false;
        }

        log.record = controller.run_iteration(round, x_start, result.store);
        for (std::size_t t = 0; t < T; ++t) {
            std::vector<double> row;
            for (int i = 0; i < M; ++i) {
                row.push_back(hull_distance(result.store.safe_set_matrix(i).D, explore.targets[t][static_cast<std::size_t>(i)]));
            }
            log.hull_distance.push_back(std::move(row));
        }
        spdlog::info("exploration round {} (target {}): reached {}, cost {:.4f}", round, k + 1, hit, log.record.cost);
        result.rounds.push_back(std::move(log));

        if (explore.variant == ExplorationObjective::Kind::Quadratic) {
            if (hit) reached[k] = true;
            if (std::all_of(reached.begin(), reached.end(), [](bool b) { return b; })) {
                result.complete = true;
                break;
            }
        }
    }
    if (explore.variant == ExplorationObjective::Kind::Linear) result.complete = true;
    if (!result.complete) {
        spdlog::warn("exploration stopped after {} rounds without reaching every target", explore.max_rounds);
    }
    return result;
}

namespace {

using Point = std::array<double, 2>;

/// Counter-clockwise hull of 2-D points (monotone chain).
std::vector<Point> convex_hull_2d(std::vector<Point> pts) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;
    auto cross = [](const Point& o, const Point& a, const Point& b) {
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    };
    std::vector<Point> hull(2 * pts.size());
    std::size_t n = 0;
    for (const auto& p : pts) {
        while (n >= 2 && cross(hull[n - 2], hull[n - 1], p) <= 0.0) --n;
        hull[n++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = n + 1; i-- > 0;) {
        while (n >= lower && cross(hull[n - 2], hull[n - 1], pts[i]) <= 0.0) --n;
        hull[n++] = pts[i];
    }
    hull.resize(n - 1);
    return hull;
}

}  // namespace

void write_explore_csv(const std::string& directory, const PartitionedSystem& system, const ExploreResult& result) {
    std::filesystem::create_directories(directory);
    const int M = system.size();
    int max_n = 0;
    for (const auto& L : system.locals) max_n = std::max(max_n, L.state_dim());
    {
        std::vector<std::string> header{"round", "target", "subsystem"};
        for (int k = 0; k < max_n; ++k) header.push_back("x" + std::to_string(k + 1));
        header.push_back("distance");
        CsvWriter csv(directory + "/explore_rounds.csv", header);
        for (const auto& r : result.rounds) {
            for (int i = 0; i < M; ++i) {
                const Vector& x = r.selected[static_cast<std::size_t>(i)];
                csv.cell(r.round).cell(r.target + 1).cell(i + 1);
                for (int k = 0; k < max_n; ++k) {
                    if (k < x.size()) csv.cell(x(k));
                    else csv.blank();
                }
                const double d = r.distance[static_cast<std::size_t>(i)];
                if (std::isnan(d)) csv.blank();
                else csv.cell(d);
                csv.end_row();
            }
        }
    }
    {
        // Hull of the stored states after each round, in the first two own coordinates.
        CsvWriter csv(directory + "/explore_hulls.csv", {"round", "subsystem", "vertex", "x1", "x2"});
        std::vector<std::vector<Point>> points(static_cast<std::size_t>(M));
        auto add_iteration = [&](int id) {
            for (int i = 0; i < M; ++i) {
                for (const auto& tr : result.store.trajectories(i)) {
                    if (tr.iteration_id != id) continue;
                    for (const auto& x : tr.states) {
                        points[static_cast<std::size_t>(i)].push_back({x(0), x.size() > 1 ? x(1) : 0.0});
                    }
                }
            }
        };
        add_iteration(0);
        for (const auto& r : result.rounds) {
            add_iteration(r.round);
            for (int i = 0; i < M; ++i) {
                const auto hull = convex_hull_2d(points[static_cast<std::size_t>(i)]);
                for (std::size_t v = 0; v < hull.size(); ++v) {
                    csv.cell(r.round).cell(i + 1).cell(static_cast<int>(v)).cell(hull[v][0]).cell(hull[v][1]);
                    csv.end_row();
                }
            }
        }
    }
}

}  // namespace dlmpc
