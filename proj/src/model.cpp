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
#include "dlmpc/model.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "dlmpc/error.hpp"

namespace dlmpc {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::InvalidSystem: return "InvalidSystem";
        case ErrorKind::ConstraintRowUnassignable: return "ConstraintRowUnassignable";
        case ErrorKind::NotConverged: return "NotConverged";
        case ErrorKind::RegistryMismatch: return "RegistryMismatch";
        case ErrorKind::EmptySafeSet: return "EmptySafeSet";
        case ErrorKind::DisconnectedGraph: return "DisconnectedGraph";
        case ErrorKind::RecursiveFeasibilityViolated: return "RecursiveFeasibilityViolated";
        case ErrorKind::IterationDidNotConverge: return "IterationDidNotConverge";
        case ErrorKind::BootstrapFailed: return "BootstrapFailed";
        case ErrorKind::InvalidTrajectory: return "InvalidTrajectory";
        case ErrorKind::RoundBudgetExhausted: return "RoundBudgetExhausted";
        case ErrorKind::Config: return "ConfigError";
    }
    return "Error";
}

// ---------------------------------------------------------------------------
// Partition

Partition::Partition(std::vector<Block> blocks, std::vector<std::vector<int>> neighbors)
    : blocks_(std::move(blocks)) {
    const int M = static_cast<int>(blocks_.size());
    neighbors.resize(static_cast<std::size_t>(M));
    std::vector<std::set<int>> sets(static_cast<std::size_t>(M));
    for (int i = 0; i < M; ++i) {
        sets[static_cast<std::size_t>(i)].insert(i);
        for (int j : neighbors[static_cast<std::size_t>(i)]) {
            if (j < 0 || j >= M) {
                throw Error(ErrorKind::DimensionMismatch,
                            "neighbor index " + std::to_string(j) + " out of range for subsystem " +
                                std::to_string(i));
            }
            sets[static_cast<std::size_t>(i)].insert(j);
            sets[static_cast<std::size_t>(j)].insert(i);
        }
    }
    neighbors_.reserve(static_cast<std::size_t>(M));
    for (const auto& s : sets) neighbors_.emplace_back(s.begin(), s.end());
}

Partition Partition::single(int state_dim, int input_dim) {
    return Partition({Block{0, state_dim, 0, input_dim}}, {{0}});
}

IndexList Partition::state_indices(int i) const {
    const Block& b = block(i);
    IndexList out(static_cast<std::size_t>(b.state_count));
    std::iota(out.begin(), out.end(), b.state_begin);
    return out;
}

IndexList Partition::input_indices(int i) const {
    const Block& b = block(i);
    IndexList out(static_cast<std::size_t>(b.input_count));
    std::iota(out.begin(), out.end(), b.input_begin);
    return out;
}

IndexList Partition::neighborhood_state_indices(int i) const {
    IndexList out;
    for (int j : neighbors(i)) {
        const IndexList s = state_indices(j);
        out.insert(out.end(), s.begin(), s.end());
    }
    return out;
}

int Partition::state_owner(int state) const {
    for (int i = 0; i < size(); ++i) {
        const Block& b = blocks_[static_cast<std::size_t>(i)];
        if (state >= b.state_begin && state < b.state_begin + b.state_count) return i;
    }
    return -1;
}

int Partition::input_owner(int input) const {
    for (int i = 0; i < size(); ++i) {
        const Block& b = blocks_[static_cast<std::size_t>(i)];
        if (input >= b.input_begin && input < b.input_begin + b.input_count) return i;
    }
    return -1;
}

bool Partition::is_neighbor(int i, int j) const {
    const auto& n = neighbors(i);
    return std::binary_search(n.begin(), n.end(), j);
}

bool Partition::connected() const {
    if (size() == 0) return true;
    std::vector<char> seen(static_cast<std::size_t>(size()), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        for (int j : neighbors(i)) {
            if (!seen[static_cast<std::size_t>(j)]) {
                seen[static_cast<std::size_t>(j)] = 1;
                stack.push_back(j);
            }
        }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
}

// ---------------------------------------------------------------------------
// StageCost

StageCost StageCost::separable(const Partition& partition, const std::vector<Matrix>& Q_own,
                               const std::vector<Matrix>& R_own) {
    const int M = partition.size();
    if (static_cast<int>(Q_own.size()) != M || static_cast<int>(R_own.size()) != M) {
        throw Error(ErrorKind::DimensionMismatch, "separable cost needs one Q_i and R_i per subsystem");
    }
    StageCost cost;
    for (int i = 0; i < M; ++i) {
        const IndexList nb = partition.neighborhood_state_indices(i);
        const Block& b = partition.block(i);
        const Matrix& Qi = Q_own[static_cast<std::size_t>(i)];
        if (Qi.rows() != b.state_count || Qi.cols() != b.state_count ||
            R_own[static_cast<std::size_t>(i)].rows() != b.input_count ||
            R_own[static_cast<std::size_t>(i)].cols() != b.input_count) {
            throw Error(ErrorKind::DimensionMismatch, "cost block size mismatch for subsystem " + std::to_string(i));
        }
        Matrix QN = Matrix::Zero(static_cast<Eigen::Index>(nb.size()), static_cast<Eigen::Index>(nb.size()));
        const auto offset = static_cast<Eigen::Index>(
            std::find(nb.begin(), nb.end(), b.state_begin) - nb.begin());
        QN.block(offset, offset, b.state_count, b.state_count) = Qi;
        cost.Q.push_back(std::move(QN));
        cost.R.push_back(R_own[static_cast<std::size_t>(i)]);
    }
    return cost;
}

std::pair<Matrix, Matrix> StageCost::reconstruct(const Partition& partition, int state_dim, int input_dim) const {
    Matrix Qg = Matrix::Zero(state_dim, state_dim);
    Matrix Rg = Matrix::Zero(input_dim, input_dim);
    for (int i = 0; i < partition.size(); ++i) {
        const IndexList nb = partition.neighborhood_state_indices(i);
        const IndexList in = partition.input_indices(i);
        const Matrix& Qi = Q[static_cast<std::size_t>(i)];
        const Matrix& Ri = R[static_cast<std::size_t>(i)];
        for (std::size_t r = 0; r < nb.size(); ++r)
            for (std::size_t c = 0; c < nb.size(); ++c)
                Qg(nb[r], nb[c]) += Qi(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        for (std::size_t r = 0; r < in.size(); ++r)
            for (std::size_t c = 0; c < in.size(); ++c)
                Rg(in[r], in[c]) += Ri(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
    return {Qg, Rg};
}

StageCost StageCost::scaled_states(double factor) const {
    StageCost out = *this;
    for (auto& q : out.Q) q *= factor;
    return out;
}

// ---------------------------------------------------------------------------
// Validation

bool ValidationReport::has(ViolationKind kind) const {
    return std::any_of(violations.begin(), violations.end(), [kind](const Violation& v) { return v.kind == kind; });
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    for (const auto& v : violations) os << v.message << '\n';
    return os.str();
}

namespace {

/// Blocks touched by the nonzero entries of a row.
std::set<int> touched_blocks(const Partition& partition, const Matrix& m, Eigen::Index row, bool inputs) {
    std::set<int> out;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (m(row, c) != 0.0) {
            out.insert(inputs ? partition.input_owner(static_cast<int>(c)) : partition.state_owner(static_cast<int>(c)));
        }
    }
    return out;
}

constexpr double kFeasibilityTol = 1e-9;

}  // namespace

ValidationReport validate(const GlobalSystem& sys, const Partition& partition) {
    ValidationReport report;
    auto add = [&report](ViolationKind kind, int i, int j, int row, std::string msg) {
        report.violations.push_back(Violation{kind, i, j, row, std::move(msg)});
    };

    const auto n = sys.A.rows();
    const auto m = sys.B.cols();
    if (sys.A.cols() != n || sys.B.rows() != n || sys.G.cols() != n || sys.G.rows() != sys.g.size() ||
        sys.L.cols() != m || sys.L.rows() != sys.l.size() || sys.x_target.size() != n || sys.x_start.size() != n) {
        add(ViolationKind::Dimension, -1, -1, -1, "matrix dimensions are inconsistent");
        return report;
    }

    // Blocks must tile the state and input index sets.
    std::vector<int> state_hits(static_cast<std::size_t>(n), 0);
    std::vector<int> input_hits(static_cast<std::size_t>(m), 0);
    for (int i = 0; i < partition.size(); ++i) {
        const Block& b = partition.block(i);
        if (b.state_begin < 0 || b.state_count < 0 || b.state_begin + b.state_count > n || b.input_begin < 0 ||
            b.input_count < 0 || b.input_begin + b.input_count > m) {
            add(ViolationKind::PartitionCover, i, -1, -1, "block " + std::to_string(i) + " exceeds system dimensions");
            return report;
        }
        for (int s = b.state_begin; s < b.state_begin + b.state_count; ++s) ++state_hits[static_cast<std::size_t>(s)];
        for (int u = b.input_begin; u < b.input_begin + b.input_count; ++u) ++input_hits[static_cast<std::size_t>(u)];
    }
    const bool states_tiled = std::all_of(state_hits.begin(), state_hits.end(), [](int h) { return h == 1; });
    const bool inputs_tiled = std::all_of(input_hits.begin(), input_hits.end(), [](int h) { return h == 1; });
    if (!states_tiled || !inputs_tiled) {
        add(ViolationKind::PartitionCover, -1, -1, -1, "blocks must be disjoint and cover all states and inputs");
        return report;
    }

    // (a) input block j may only drive state block j.
    for (Eigen::Index r = 0; r < n; ++r) {
        const int i = partition.state_owner(static_cast<int>(r));
        for (Eigen::Index c = 0; c < m; ++c) {
            const int j = partition.input_owner(static_cast<int>(c));
            if (sys.B(r, c) != 0.0 && i != j) {
                add(ViolationKind::InputCoupling, i, j, static_cast<int>(r),
                    "B couples input block " + std::to_string(j) + " into state block " + std::to_string(i));
            }
        }
    }

    // (b) dynamic and constraint couplings must be covered by neighbor sets.
    std::set<std::pair<int, int>> reported;
    for (Eigen::Index r = 0; r < n; ++r) {
        const int i = partition.state_owner(static_cast<int>(r));
        for (Eigen::Index c = 0; c < n; ++c) {
            const int j = partition.state_owner(static_cast<int>(c));
            if (sys.A(r, c) != 0.0 && !partition.is_neighbor(i, j) && reported.insert({i, j}).second) {
                add(ViolationKind::MissingNeighbor, i, j, -1,
                    "A couples block " + std::to_string(j) + " into block " + std::to_string(i) +
                        " but they are not neighbors");
            }
        }
    }
    for (Eigen::Index r = 0; r < sys.G.rows(); ++r) {
        const std::set<int> blocks = touched_blocks(partition, sys.G, r, false);
        for (int i : blocks) {
            for (int j : blocks) {
                if (i < j && !partition.is_neighbor(i, j)) {
                    add(ViolationKind::MissingNeighbor, i, j, static_cast<int>(r),
                        "constraint row " + std::to_string(r) + " couples non-neighbors " + std::to_string(i) +
                            " and " + std::to_string(j));
                }
            }
        }
    }
    for (Eigen::Index r = 0; r < sys.L.rows(); ++r) {
        if (touched_blocks(partition, sys.L, r, true).size() > 1) {
            add(ViolationKind::CoupledInputRow, -1, -1, static_cast<int>(r),
                "input constraint row " + std::to_string(r) + " couples several subsystems");
        }
    }

    // (c) neighbor graph connectivity.
    if (!partition.connected()) {
        add(ViolationKind::DisconnectedGraph, -1, -1, -1, "neighbor graph is disconnected");
    }

    if ((sys.A * sys.x_target - sys.x_target).lpNorm<Eigen::Infinity>() > 1e-12) {
        add(ViolationKind::TargetNotEquilibrium, -1, -1, -1, "x_target is not an equilibrium under zero input");
    }
    if (sys.G.rows() > 0 && ((sys.G * sys.x_target - sys.g).array() > kFeasibilityTol).any()) {
        add(ViolationKind::TargetInfeasible, -1, -1, -1, "x_target violates the state constraints");
    }
    if (sys.L.rows() > 0 && (sys.l.array() < -kFeasibilityTol).any()) {
        add(ViolationKind::TargetInfeasible, -1, -1, -1, "zero input violates the input constraints");
    }
    if (sys.G.rows() > 0 && ((sys.G * sys.x_start - sys.g).array() > kFeasibilityTol).any()) {
        add(ViolationKind::StartInfeasible, -1, -1, -1, "x_start violates the state constraints");
    }
    return report;
}

// ---------------------------------------------------------------------------
// Decomposition

std::vector<LocalSystem> decompose(const GlobalSystem& sys, const Partition& partition, const StageCost& cost) {
    const int M = partition.size();
    if (static_cast<int>(cost.Q.size()) != M || static_cast<int>(cost.R.size()) != M) {
        throw Error(ErrorKind::DimensionMismatch, "stage cost must have one entry per subsystem");
    }

    std::vector<LocalSystem> locals(static_cast<std::size_t>(M));
    for (int i = 0; i < M; ++i) {
        LocalSystem& loc = locals[static_cast<std::size_t>(i)];
        loc.index = i;
        loc.neighbors = partition.neighbors(i);
        loc.states = partition.state_indices(i);
        loc.inputs = partition.input_indices(i);
        loc.neighborhood = partition.neighborhood_state_indices(i);
        for (int s : loc.states) {
            loc.own_in_neighborhood.push_back(
                static_cast<int>(std::find(loc.neighborhood.begin(), loc.neighborhood.end(), s) - loc.neighborhood.begin()));
        }
        loc.A_N = select(sys.A, loc.states, loc.neighborhood);
        loc.B = select(sys.B, loc.states, loc.inputs);
        loc.Q_N = cost.Q[static_cast<std::size_t>(i)];
        loc.R = cost.R[static_cast<std::size_t>(i)];
        if (loc.Q_N.rows() != loc.neighborhood_dim() || loc.Q_N.cols() != loc.neighborhood_dim() ||
            loc.R.rows() != loc.input_dim() || loc.R.cols() != loc.input_dim()) {
            throw Error(ErrorKind::DimensionMismatch, "stage cost dimensions do not match subsystem " + std::to_string(i));
        }
        loc.x_target = select(sys.x_target, loc.states);
        loc.x_start = select(sys.x_start, loc.states);
        loc.x_target_neighborhood = select(sys.x_target, loc.neighborhood);
    }

    // State constraint rows: single-block rows go to their block, coupling rows
    // to the lowest-index subsystem whose neighborhood covers them.
    std::vector<IndexList> state_rows(static_cast<std::size_t>(M));
    for (Eigen::Index r = 0; r < sys.G.rows(); ++r) {
        std::set<int> support;
        for (Eigen::Index c = 0; c < sys.G.cols(); ++c) {
            if (sys.G(r, c) != 0.0) support.insert(static_cast<int>(c));
        }
        if (support.empty()) {
            if (sys.g(r) < 0.0) throw Error(ErrorKind::InvalidSystem, "constraint row " + std::to_string(r) + " is infeasible");
            continue;
        }
        std::set<int> blocks;
        for (int s : support) blocks.insert(partition.state_owner(s));
        int owner = -1;
        if (blocks.size() == 1) {
            owner = *blocks.begin();
        } else {
            for (int i = 0; i < M && owner < 0; ++i) {
                const auto& nb = locals[static_cast<std::size_t>(i)].neighborhood;
                const bool covers = std::all_of(support.begin(), support.end(), [&nb](int s) {
                    return std::find(nb.begin(), nb.end(), s) != nb.end();
                });
                if (covers) owner = i;
            }
        }
        if (owner < 0) {
            throw Error(ErrorKind::ConstraintRowUnassignable,
                        "state constraint row " + std::to_string(r) + " is not covered by any neighborhood");
        }
        state_rows[static_cast<std::size_t>(owner)].push_back(static_cast<int>(r));
    }

    std::vector<IndexList> input_rows(static_cast<std::size_t>(M));
    for (Eigen::Index r = 0; r < sys.L.rows(); ++r) {
        std::set<int> blocks = touched_blocks(partition, sys.L, r, true);
        if (blocks.empty()) {
            if (sys.l(r) < 0.0) throw Error(ErrorKind::InvalidSystem, "input row " + std::to_string(r) + " is infeasible");
            continue;
        }
        if (blocks.size() > 1) {
            throw Error(ErrorKind::ConstraintRowUnassignable,
                        "input constraint row " + std::to_string(r) + " couples several subsystems");
        }
        input_rows[static_cast<std::size_t>(*blocks.begin())].push_back(static_cast<int>(r));
    }

    for (int i = 0; i < M; ++i) {
        LocalSystem& loc = locals[static_cast<std::size_t>(i)];
        loc.state_rows = state_rows[static_cast<std::size_t>(i)];
        loc.G_N = select(sys.G, loc.state_rows, loc.neighborhood);
        loc.g_N = select(sys.g, loc.state_rows);
        loc.input_rows = input_rows[static_cast<std::size_t>(i)];
        loc.L = select(sys.L, loc.input_rows, loc.inputs);
        loc.l = select(sys.l, loc.input_rows);
    }
    return locals;
}

PartitionedSystem PartitionedSystem::create(GlobalSystem global, Partition partition, StageCost cost) {
    const ValidationReport report = validate(global, partition);
    if (!report.ok()) throw Error(ErrorKind::InvalidSystem, report.summary());
    PartitionedSystem out;
    out.locals = decompose(global, partition, cost);
    out.global = std::move(global);
    out.partition = std::move(partition);
    out.cost = std::move(cost);
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation

Vector step(const GlobalSystem& system, const Vector& x, const Vector& u) {
    return system.A * x + system.B * u;
}

Vector local_step(const LocalSystem& local, const Vector& x_neighborhood, const Vector& u_own) {
    return local.A_N * x_neighborhood + local.B * u_own;
}

double local_stage_cost(const LocalSystem& local, const Vector& x_neighborhood, const Vector& u_own) {
    const Vector dx = x_neighborhood - local.x_target_neighborhood;
    return dx.dot(local.Q_N * dx) + u_own.dot(local.R * u_own);
}

StageCostValue stage_cost(const PartitionedSystem& system, const Vector& x, const Vector& u) {
    StageCostValue out;
    out.per_subsystem.reserve(system.locals.size());
    for (const LocalSystem& loc : system.locals) {
        const double h = local_stage_cost(loc, select(x, loc.neighborhood), select(u, loc.inputs));
        out.per_subsystem.push_back(h);
        out.total += h;
    }
    return out;
}

double state_violation(const GlobalSystem& system, const Vector& x) {
    if (system.G.rows() == 0) return 0.0;
    return std::max(0.0, (system.G * x - system.g).maxCoeff());
}

double input_violation(const GlobalSystem& system, const Vector& u) {
    if (system.L.rows() == 0) return 0.0;
    return std::max(0.0, (system.L * u - system.l).maxCoeff());
}

Vector assemble_states(const Partition& partition, const std::vector<Vector>& parts) {
    int n = 0;
    for (const Block& b : partition.blocks()) n += b.state_count;
    Vector x(n);
    for (int i = 0; i < partition.size(); ++i) {
        const Block& b = partition.block(i);
        x.segment(b.state_begin, b.state_count) = parts.at(static_cast<std::size_t>(i));
    }
    return x;
}

Vector assemble_inputs(const Partition& partition, const std::vector<Vector>& parts) {
    int m = 0;
    for (const Block& b : partition.blocks()) m += b.input_count;
    Vector u(m);
    for (int i = 0; i < partition.size(); ++i) {
        const Block& b = partition.block(i);
        u.segment(b.input_begin, b.input_count) = parts.at(static_cast<std::size_t>(i));
    }
    return u;
}

}  // namespace dlmpc
