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
#ifndef DLMPC_EXPLORE_HPP
#define DLMPC_EXPLORE_HPP

#include <memory>
#include <string>
#include <vector>

#include "dlmpc/controller.hpp"

namespace dlmpc {

struct ExploreConfig {
    /// targets[k][i]: desired initial state of subsystem i for target k. Targets are
    /// chased in turn, one per round. For the linear variant these are directions.
    std::vector<std::vector<Vector>> targets;
    int max_rounds = 10;
    /// Acceptance bound on the squared distance to a desired state.
    double epsilon = 1e-3;
    ExplorationObjective::Kind variant = ExplorationObjective::Kind::Quadratic;

    void validate(const PartitionedSystem& system) const;
};

struct RoundLog {
    int round = 0;
    int target = 0;
    /// Selected initial state per subsystem.
    std::vector<Vector> selected;
    /// Squared distance of each selected state to its desired state (quadratic variant).
    std::vector<double> distance;
    /// hull_distance[k][i]: distance from target k of subsystem i to the hull of its
    /// stored states after this round.
    std::vector<std::vector<double>> hull_distance;
    IterationRecord record;
};

struct ExploreResult {
    SafeSetStore store;
    std::vector<RoundLog> rounds;
    /// Every desired state was reached (quadratic variant) or the budget was used (linear).
    bool complete = false;

    /// Closed-loop records of all rounds, in order.
    std::vector<IterationRecord> records() const;
};

/// Euclidean distance from `point` to the convex hull of the columns of D.
double hull_distance(const Matrix& D, const Vector& point);

/// Solves the coupled exploration problems and returns each subsystem's free initial state.
/// `objective[i]` is the desired state (quadratic) or direction (linear) of subsystem i.
std::vector<Vector> select_initial_states(const PartitionedSystem& system, const SafeSetStore& store,
                                          const std::vector<Vector>& objective, ExplorationObjective::Kind variant,
                                          const RunConfig& config, ConsensusReport* report = nullptr);

/**
 * Grows the stored data from the target points outward. Each round selects
 * initial states toward one target and runs a single learning iteration from
 * them. Stops when every target has been reached within epsilon or after
 * max_rounds; in the latter case `complete` is false.
 */
ExploreResult enlarge_domain(const PartitionedSystem& system, const ExploreConfig& explore, const RunConfig& config,
                             std::shared_ptr<Transport> transport = nullptr);

/// Writes explore_rounds.csv and explore_hulls.csv under `directory`.
void write_explore_csv(const std::string& directory, const PartitionedSystem& system, const ExploreResult& result);

}  // namespace dlmpc

#endif  // DLMPC_EXPLORE_HPP
