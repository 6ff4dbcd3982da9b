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
#ifndef DLMPC_FHOCP_HPP
#define DLMPC_FHOCP_HPP

#include <vector>

#include "dlmpc/model.hpp"
#include "dlmpc/qp.hpp"
#include "dlmpc/safeset.hpp"

namespace dlmpc {

struct Segment {
    int begin = 0;
    int size = 0;
    int end() const { return begin + size; }
};

/**
 * @brief Index map of one agent's decision vector
 *
 *   z = [ x_N(0) .. x_N(N-1) | x_own(N) | alpha (K) | u(0) .. u(N-1) ]
 *
 * x_N(k) is the neighborhood state predicted k steps ahead, x_own(N) the
 * agent's own terminal state.
 */
struct DecisionLayout {
    int horizon = 0;
    int neighborhood_dim = 0;
    int state_dim = 0;
    int input_dim = 0;
    int alpha_dim = 0;
    IndexList own_in_neighborhood;

    Segment x_traj;
    Segment alpha;
    Segment u_traj;

    DecisionLayout() = default;
    DecisionLayout(int horizon, int neighborhood_dim, IndexList own_in_neighborhood, int input_dim, int alpha_dim);

    int dim() const { return u_traj.end(); }
    /// Component `pos` of the neighborhood state at step k < N.
    int state(int k, int pos) const { return x_traj.begin + k * neighborhood_dim + pos; }
    /// Own-state component r at step k <= N.
    int own_state(int k, int r) const;
    int input(int k, int r) const { return u_traj.begin + k * input_dim + r; }
};

/// Row blocks of the assembled QP, so callers can update right-hand sides.
struct FhocpRows {
    Segment initial;   // equality rows fixing x_N(0)
    Segment dynamics;  // equality rows
    Segment terminal;  // equality rows x_own(N) = D alpha, then sum(alpha) = 1
    Segment state;     // inequality rows
    Segment input;     // inequality rows
    Segment simplex;   // inequality rows -alpha <= 0
};

struct LocalFhocp {
    int subsystem = 0;
    QuadraticProgram qp;
    /// Constant added to qp.objective(z) to obtain the true cost.
    double offset = 0.0;
    DecisionLayout layout;
    FhocpRows rows;
    IndexList neighborhood;  // global state ids of x_N
    IndexList states;        // global state ids of the own block
    IndexList inputs;
    bool free_initial_state = false;

    double objective(const Vector& z) const { return qp.objective(z) + offset; }
};

struct FhocpOptions {
    int horizon = 4;
    /// Terminal constraint x_own(N) in conv(D) with cost c'alpha; off for the bootstrap controller.
    bool terminal_set = true;
    /// Multiplies the state weight of the stage cost.
    double state_scale = 1.0;
    /// Weight on the own terminal-state deviation, as a multiple of the scaled own-block state weight.
    double terminal_weight = 0.0;
};

/// Tracking problem with the measured neighborhood state as initial condition.
/// `safe_set` may be null only when options.terminal_set is false.
LocalFhocp build_local(const LocalSystem& local, const SafeSetData* safe_set, const Vector& x_neighborhood_now,
                       const FhocpOptions& options);

/// Rewrites the initial-condition right-hand side in place.
void set_initial_state(LocalFhocp& problem, const Vector& x_neighborhood_now);

struct ExplorationObjective {
    enum class Kind { Quadratic, Linear };
    Kind kind = Kind::Quadratic;
    /// Quadratic: desired own initial state. Linear: weights on the own initial state.
    Vector target;

    static ExplorationObjective toward(Vector desired) { return {Kind::Quadratic, std::move(desired)}; }
    static ExplorationObjective linear(Vector weights) { return {Kind::Linear, std::move(weights)}; }
};

/// Same constraints as build_local with a free initial state (constrained at k = 0
/// as well) and no stage cost.
LocalFhocp build_exploration(const LocalSystem& local, const SafeSetData& safe_set,
                             const ExplorationObjective& objective, const FhocpOptions& options);

/// Whole-plant problem over one block; D stacks every subsystem's columns and the
/// terminal cost sums the per-subsystem costs-to-go.
LocalFhocp build_centralized(const PartitionedSystem& system, const SafeSetStore& store, const Vector& x_now,
                             const FhocpOptions& options);

/// Pairs of decision-vector entries two neighbors must agree on.
struct EdgeOverlap {
    int i = 0;
    int j = 0;
    IndexList in_i;
    IndexList in_j;
};

/// One overlap per undirected edge (i < j). Throws DisconnectedGraph.
std::vector<EdgeOverlap> edge_overlaps(const std::vector<LocalFhocp>& problems, const Partition& partition);

/// Block-diagonal stack of all local problems plus the edge equalities.
struct StackedProblem {
    QuadraticProgram qp;
    double offset = 0.0;
    std::vector<Segment> blocks;
};

StackedProblem stack_consensus(const std::vector<LocalFhocp>& problems, const std::vector<EdgeOverlap>& overlaps);

}  // namespace dlmpc

#endif  // DLMPC_FHOCP_HPP
