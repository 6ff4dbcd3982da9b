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
#ifndef DLMPC_MODEL_HPP
#define DLMPC_MODEL_HPP

#include <string>
#include <utility>
#include <vector>

#include "dlmpc/types.hpp"

namespace dlmpc {

/**
 * @brief Coupled discrete-time LTI plant x+ = A x + B u with polytopic
 * constraints G x <= g and L u <= l.
 *
 * x_target is an equilibrium under zero input; x_start is the task start.
 */
struct GlobalSystem {
    Matrix A;
    Matrix B;
    Matrix G;
    Vector g;
    Matrix L;
    Vector l;
    Vector x_target;
    Vector x_start;

    int state_dim() const { return static_cast<int>(A.rows()); }
    int input_dim() const { return static_cast<int>(B.cols()); }
};

/// Contiguous state and input ranges owned by one subsystem.
struct Block {
    int state_begin = 0;
    int state_count = 0;
    int input_begin = 0;
    int input_count = 0;
};

/**
 * @brief Subsystem blocks plus neighbor sets.
 *
 * Neighbor sets are normalized on construction: sorted, deduplicated, every
 * subsystem contains itself, and the relation is made symmetric.
 */
class Partition {
public:
    Partition() = default;
    Partition(std::vector<Block> blocks, std::vector<std::vector<int>> neighbors);

    /// One block spanning the whole system.
    static Partition single(int state_dim, int input_dim);

    int size() const { return static_cast<int>(blocks_.size()); }
    const Block& block(int i) const { return blocks_.at(static_cast<std::size_t>(i)); }
    const std::vector<Block>& blocks() const { return blocks_; }
    const std::vector<int>& neighbors(int i) const { return neighbors_.at(static_cast<std::size_t>(i)); }

    IndexList state_indices(int i) const;
    IndexList input_indices(int i) const;
    /// States of all subsystems in N_i, ordered by subsystem then by component.
    IndexList neighborhood_state_indices(int i) const;

    /// Subsystem owning the given global state (or -1).
    int state_owner(int state) const;
    int input_owner(int input) const;

    bool is_neighbor(int i, int j) const;
    bool connected() const;

private:
    std::vector<Block> blocks_;
    std::vector<std::vector<int>> neighbors_;
};

/**
 * @brief Per-subsystem quadratic stage costs h_i = dx_Ni' Q_Ni dx_Ni + u_i' R_i u_i,
 * with dx measured from the target equilibrium.
 *
 * Q[i] is indexed like Partition::neighborhood_state_indices(i).
 */
struct StageCost {
    std::vector<Matrix> Q;
    std::vector<Matrix> R;

    /// Separable form: each Q_i acts on block i only.
    static StageCost separable(const Partition& partition, const std::vector<Matrix>& Q_own,
                               const std::vector<Matrix>& R_own);

    /// Global (Q, R) obtained by summing the lifted local weights.
    std::pair<Matrix, Matrix> reconstruct(const Partition& partition, int state_dim, int input_dim) const;

    StageCost scaled_states(double factor) const;
};

enum class ViolationKind {
    Dimension,
    PartitionCover,
    InputCoupling,
    MissingNeighbor,
    CoupledInputRow,
    DisconnectedGraph,
    TargetNotEquilibrium,
    TargetInfeasible,
    StartInfeasible,
};

struct Violation {
    ViolationKind kind;
    int subsystem = -1;
    int other = -1;
    int row = -1;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    bool has(ViolationKind kind) const;
    std::string summary() const;
};

/// Never throws; lists every structural problem it finds.
ValidationReport validate(const GlobalSystem& system, const Partition& partition);

/// The view of the plant held by one subsystem.
struct LocalSystem {
    int index = 0;
    std::vector<int> neighbors;
    IndexList states;
    IndexList inputs;
    IndexList neighborhood;
    /// Positions of the own states inside the neighborhood vector.
    IndexList own_in_neighborhood;

    Matrix A_N;  // n_i x n_Ni
    Matrix B;    // n_i x m_i
    Matrix G_N;  // owned state-constraint rows over the neighborhood
    Vector g_N;
    IndexList state_rows;  // global row ids of G_N
    Matrix L;
    Vector l;
    IndexList input_rows;

    Matrix Q_N;
    Matrix R;

    Vector x_target;
    Vector x_start;
    Vector x_target_neighborhood;

    int state_dim() const { return static_cast<int>(states.size()); }
    int input_dim() const { return static_cast<int>(inputs.size()); }
    int neighborhood_dim() const { return static_cast<int>(neighborhood.size()); }
};

/**
 * Extracts per-subsystem dynamics, constraints and costs.
 *
 * A state-constraint row that touches a single block belongs to that block.
 * A row coupling several blocks belongs to the lowest-index subsystem whose
 * neighborhood covers all of its variables.
 */
std::vector<LocalSystem> decompose(const GlobalSystem& system, const Partition& partition,
                                   const StageCost& cost);

/// Validated system together with its decomposition. Immutable after creation.
struct PartitionedSystem {
    GlobalSystem global;
    Partition partition;
    StageCost cost;
    std::vector<LocalSystem> locals;

    static PartitionedSystem create(GlobalSystem global, Partition partition, StageCost cost);

    int size() const { return partition.size(); }
};

Vector step(const GlobalSystem& system, const Vector& x, const Vector& u);
Vector local_step(const LocalSystem& local, const Vector& x_neighborhood, const Vector& u_own);

struct StageCostValue {
    double total = 0.0;
    std::vector<double> per_subsystem;
};

double local_stage_cost(const LocalSystem& local, const Vector& x_neighborhood, const Vector& u_own);
StageCostValue stage_cost(const PartitionedSystem& system, const Vector& x, const Vector& u);

/// Largest violation of G x <= g (0 when satisfied).
double state_violation(const GlobalSystem& system, const Vector& x);
double input_violation(const GlobalSystem& system, const Vector& u);

/// Stacks per-subsystem pieces into a global vector.
Vector assemble_states(const Partition& partition, const std::vector<Vector>& parts);
Vector assemble_inputs(const Partition& partition, const std::vector<Vector>& parts);

}  // namespace dlmpc

#endif  // DLMPC_MODEL_HPP
