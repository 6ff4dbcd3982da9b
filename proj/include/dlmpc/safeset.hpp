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
#ifndef DLMPC_SAFESET_HPP
#define DLMPC_SAFESET_HPP

#include <map>
#include <string>
#include <vector>

#include "dlmpc/types.hpp"

namespace dlmpc {

struct RetentionPolicy {
    enum class Kind { KeepAll, KeepLast };
    Kind kind = Kind::KeepAll;
    int keep = 0;

    static RetentionPolicy keep_all() { return {}; }
    static RetentionPolicy keep_last(int k) { return {Kind::KeepLast, k}; }
};

struct SafeSetOptions {
    double convergence_epsilon = 1e-3;
    double tail_epsilon = 1e-6;
    RetentionPolicy retention;
};

/// One recorded trajectory of one subsystem.
struct StoredTrajectory {
    int iteration_id = 0;
    std::vector<Vector> states;
    std::vector<Vector> inputs;
    std::vector<double> cost_to_go;
};

/// Identifies a stored sample by (iteration, time step).
struct ColumnId {
    int iteration = 0;
    int time = 0;

    bool operator==(const ColumnId& o) const { return iteration == o.iteration && time == o.time; }
    bool operator<(const ColumnId& o) const {
        return iteration < o.iteration || (iteration == o.iteration && time < o.time);
    }
};

/// Terminal data of one subsystem: stored states as columns and their costs-to-go.
struct SafeSetData {
    Matrix D;
    Vector c;
};

/// Backward accumulation of stage costs.
std::vector<double> cost_to_go(const std::vector<double>& stage_costs);

/**
 * @brief Per-subsystem recorded trajectories behind the convex safe sets.
 *
 * Trajectories are added per subsystem and committed once every subsystem has
 * supplied the same iteration. All subsystems then share one column registry,
 * so column k of every D_i refers to the same (iteration, time) sample.
 * Columns whose joint data (all subsystems' states and costs) are bitwise
 * equal to an earlier column are dropped.
 */
class SafeSetStore {
public:
    SafeSetStore() = default;
    SafeSetStore(std::vector<Vector> targets, SafeSetOptions options = {});

    int subsystems() const { return static_cast<int>(targets_.size()); }
    const std::vector<Vector>& targets() const { return targets_; }
    const SafeSetOptions& options() const { return options_; }

    /// Records the single-point trajectory at the target for every subsystem.
    void seed_with_targets(int iteration_id = 0);

    /// Throws NotConverged, RegistryMismatch or InvalidTrajectory.
    void add_trajectory(int subsystem, int iteration_id, const std::vector<Vector>& states,
                        const std::vector<Vector>& inputs, const std::vector<double>& stage_costs);

    /// True when some subsystem has supplied an iteration that is not committed yet.
    bool has_pending() const { return !pending_.empty(); }

    void prune(const RetentionPolicy& policy);

    bool empty() const { return registry_.empty(); }
    int size() const { return static_cast<int>(registry_.size()); }
    const std::vector<ColumnId>& registry() const { return registry_; }

    /// Throws EmptySafeSet.
    SafeSetData safe_set_matrix(int subsystem) const;

    /// Stacks all subsystems' columns in global state order; costs are summed.
    SafeSetData global_matrix(const std::vector<IndexList>& state_indices, int state_dim) const;

    /// Registry position of the sample one step after column k (k itself at a trajectory end).
    int successor(int k) const { return successor_.at(static_cast<std::size_t>(k)); }

    /// Committed iteration ids in commit order.
    std::vector<int> iterations() const;
    const std::vector<StoredTrajectory>& trajectories(int subsystem) const {
        return stored_.at(static_cast<std::size_t>(subsystem));
    }

    /// Per-subsystem iteration cost (cost-to-go at t = 0) of a committed iteration.
    std::vector<double> iteration_cost(int iteration_id) const;

    void save(const std::string& path) const;
    static SafeSetStore load(const std::string& path);

private:
    void commit(int iteration_id);
    void rebuild();

    std::vector<Vector> targets_;
    SafeSetOptions options_;
    std::vector<std::vector<StoredTrajectory>> stored_;
    std::map<int, std::map<int, StoredTrajectory>> pending_;
    std::vector<ColumnId> registry_;
    std::vector<int> successor_;
    std::vector<SafeSetData> data_;
};

}  // namespace dlmpc

#endif  // DLMPC_SAFESET_HPP
