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
#include "dlmpc/fhocp.hpp"

#include <algorithm>

#include "dlmpc/error.hpp"

namespace dlmpc {

DecisionLayout::DecisionLayout(int horizon_, int neighborhood_dim_, IndexList own, int input_dim_, int alpha_dim_)
    : horizon(horizon_),
      neighborhood_dim(neighborhood_dim_),
      state_dim(static_cast<int>(own.size())),
      input_dim(input_dim_),
      alpha_dim(alpha_dim_),
      own_in_neighborhood(std::move(own)) {
    x_traj = {0, horizon * neighborhood_dim + state_dim};
    alpha = {x_traj.end(), alpha_dim};
    u_traj = {alpha.end(), horizon * input_dim};
}

int DecisionLayout::own_state(int k, int r) const {
    if (k < horizon) return state(k, own_in_neighborhood[static_cast<std::size_t>(r)]);
    return x_traj.begin + horizon * neighborhood_dim + r;
}

namespace {

struct Assembly {
    enum class Mode { Tracking, Exploration };
    Mode mode = Mode::Tracking;
    const LocalSystem* local = nullptr;
    const SafeSetData* safe_set = nullptr;
    FhocpOptions options;
};

LocalFhocp assemble(const Assembly& a) {
    const LocalSystem& L = *a.local;
    const int N = a.options.horizon;
    if (N < 1) throw Error(ErrorKind::DimensionMismatch, "horizon must be at least 1");
    const bool terminal = a.options.terminal_set;
    if (terminal && (a.safe_set == nullptr || a.safe_set->D.cols() == 0)) {
        throw Error(ErrorKind::EmptySafeSet, "terminal set requested without stored data");
    }
    if (terminal && a.safe_set->D.rows() != L.state_dim()) {
        throw Error(ErrorKind::DimensionMismatch, "safe-set rows do not match the subsystem state dimension");
    }
    const bool exploration = a.mode == Assembly::Mode::Exploration;
    const int K = terminal ? static_cast<int>(a.safe_set->D.cols()) : 0;
    const int nN = L.neighborhood_dim();
    const int ni = L.state_dim();
    const int mi = L.input_dim();

    LocalFhocp out;
    out.subsystem = L.index;
    out.layout = DecisionLayout(N, nN, L.own_in_neighborhood, mi, K);
    out.neighborhood = L.neighborhood;
    out.states = L.states;
    out.inputs = L.inputs;
    out.free_initial_state = exploration;
    const DecisionLayout& lay = out.layout;
    const int d = lay.dim();

    // Objective.
    QuadraticProgram& qp = out.qp;
    qp.P = Matrix::Zero(d, d);
    qp.q = Vector::Zero(d);
    if (!exploration) {
        const Matrix Q = a.options.state_scale * L.Q_N;
        const Vector qx = -2.0 * Q * L.x_target_neighborhood;
        const double cx = L.x_target_neighborhood.dot(Q * L.x_target_neighborhood);
        for (int k = 0; k < N; ++k) {
            const int xs = lay.state(k, 0);
            qp.P.block(xs, xs, nN, nN) += 2.0 * Q;
            qp.q.segment(xs, nN) += qx;
            out.offset += cx;
            const int us = lay.input(k, 0);
            qp.P.block(us, us, mi, mi) += 2.0 * L.R;
        }
        if (a.options.terminal_weight > 0.0) {
            const Matrix Qown = a.options.terminal_weight * select(Q, L.own_in_neighborhood, L.own_in_neighborhood);
            const int ts = lay.own_state(N, 0);
            qp.P.block(ts, ts, ni, ni) += 2.0 * Qown;
            qp.q.segment(ts, ni) += -2.0 * Qown * L.x_target;
            out.offset += L.x_target.dot(Qown * L.x_target);
        }
        if (terminal) qp.q.segment(lay.alpha.begin, K) = a.safe_set->c;
    }

    // Equalities.
    const int n_init = exploration ? 0 : nN;
    const int n_dyn = N * ni;
    const int n_term = terminal ? ni + 1 : 0;
    out.rows.initial = {0, n_init};
    out.rows.dynamics = {out.rows.initial.end(), n_dyn};
    out.rows.terminal = {out.rows.dynamics.end(), n_term};
    const int me = out.rows.terminal.end();
    qp.A_eq = Matrix::Zero(me, d);
    qp.b_eq = Vector::Zero(me);
    for (int p = 0; p < n_init; ++p) {
        qp.A_eq(p, lay.state(0, p)) = 1.0;
        qp.b_eq(p) = L.x_target_neighborhood(p);
    }
    for (int k = 0; k < N; ++k) {
        for (int r = 0; r < ni; ++r) {
            const int row = out.rows.dynamics.begin + k * ni + r;
            qp.A_eq(row, lay.own_state(k + 1, r)) = 1.0;
            for (int c = 0; c < nN; ++c) qp.A_eq(row, lay.state(k, c)) -= L.A_N(r, c);
            for (int c = 0; c < mi; ++c) qp.A_eq(row, lay.input(k, c)) -= L.B(r, c);
        }
    }
    if (terminal) {
        for (int r = 0; r < ni; ++r) {
            const int row = out.rows.terminal.begin + r;
            qp.A_eq(row, lay.own_state(N, r)) = 1.0;
            qp.A_eq.block(row, lay.alpha.begin, 1, K) = -a.safe_set->D.row(r);
        }
        const int row = out.rows.terminal.begin + ni;
        qp.A_eq.block(row, lay.alpha.begin, 1, K).setOnes();
        qp.b_eq(row) = 1.0;
    }

    // Inequalities. The measured state is fixed, so its rows are dropped unless it is free.
    const int k0 = exploration ? 0 : 1;
    const int gs = static_cast<int>(L.G_N.rows());
    const int ls = static_cast<int>(L.L.rows());
    out.rows.state = {0, (N - k0) * gs};
    out.rows.input = {out.rows.state.end(), N * ls};
    out.rows.simplex = {out.rows.input.end(), K};
    const int mi_rows = out.rows.simplex.end();
    qp.A_in = Matrix::Zero(mi_rows, d);
    qp.b_in = Vector::Zero(mi_rows);
    for (int k = k0; k < N; ++k) {
        const int base = out.rows.state.begin + (k - k0) * gs;
        qp.A_in.block(base, lay.state(k, 0), gs, nN) = L.G_N;
        qp.b_in.segment(base, gs) = L.g_N;
    }
    for (int k = 0; k < N; ++k) {
        const int base = out.rows.input.begin + k * ls;
        qp.A_in.block(base, lay.input(k, 0), ls, mi) = L.L;
        qp.b_in.segment(base, ls) = L.l;
    }
    for (int k = 0; k < K; ++k) qp.A_in(out.rows.simplex.begin + k, lay.alpha.begin + k) = -1.0;
    return out;
}

}  // namespace

LocalFhocp build_local(const LocalSystem& local, const SafeSetData* safe_set, const Vector& x_neighborhood_now,
                       const FhocpOptions& options) {
    if (x_neighborhood_now.size() != local.neighborhood_dim()) {
        throw Error(ErrorKind::DimensionMismatch, "measured neighborhood state has wrong size");
    }
    Assembly a;
    a.local = &local;
    a.safe_set = safe_set;
    a.options = options;
    LocalFhocp out = assemble(a);
    set_initial_state(out, x_neighborhood_now);
    return out;
}

void set_initial_state(LocalFhocp& problem, const Vector& x_neighborhood_now) {
    if (problem.free_initial_state) throw Error(ErrorKind::DimensionMismatch, "problem has a free initial state");
    if (x_neighborhood_now.size() != problem.rows.initial.size) {
        throw Error(ErrorKind::DimensionMismatch, "measured neighborhood state has wrong size");
    }
    problem.qp.b_eq.segment(problem.rows.initial.begin, problem.rows.initial.size) = x_neighborhood_now;
}

LocalFhocp build_exploration(const LocalSystem& local, const SafeSetData& safe_set,
                             const ExplorationObjective& objective, const FhocpOptions& options) {
    if (safe_set.D.cols() == 0) throw Error(ErrorKind::EmptySafeSet, "exploration needs a nonempty safe set");
    if (objective.target.size() != local.state_dim()) {
        throw Error(ErrorKind::DimensionMismatch, "exploration objective has wrong size");
    }
    Assembly a;
    a.mode = Assembly::Mode::Exploration;
    a.local = &local;
    a.safe_set = &safe_set;
    a.options = options;
    a.options.terminal_set = true;
    LocalFhocp out = assemble(a);
    const int ni = local.state_dim();
    for (int r = 0; r < ni; ++r) {
        const int idx = out.layout.own_state(0, r);
        if (objective.kind == ExplorationObjective::Kind::Quadratic) {
            out.qp.P(idx, idx) += 2.0;
            out.qp.q(idx) -= 2.0 * objective.target(r);
        } else {
            out.qp.q(idx) += objective.target(r);
        }
    }
    if (objective.kind == ExplorationObjective::Kind::Quadratic) out.offset = objective.target.squaredNorm();
    return out;
}

LocalFhocp build_centralized(const PartitionedSystem& system, const SafeSetStore& store, const Vector& x_now,
                             const FhocpOptions& options) {
    const GlobalSystem& g = system.global;
    const int n = g.state_dim();
    const int m = g.input_dim();
    const Partition single = Partition::single(n, m);
    const auto [Q, R] = system.cost.reconstruct(system.partition, n, m);
    const StageCost cost{{Q}, {R}};
    const auto locals = decompose(g, single, cost);

    std::optional<SafeSetData> data;
    if (options.terminal_set) {
        std::vector<IndexList> idx;
        for (int i = 0; i < system.size(); ++i) idx.push_back(system.partition.state_indices(i));
        data = store.global_matrix(idx, n);
    }
    return build_local(locals[0], data ? &*data : nullptr, x_now, options);
}

std::vector<EdgeOverlap> edge_overlaps(const std::vector<LocalFhocp>& problems, const Partition& partition) {
    if (!partition.connected()) throw Error(ErrorKind::DisconnectedGraph, "neighbor graph is disconnected");
    if (static_cast<int>(problems.size()) != partition.size()) {
        throw Error(ErrorKind::DimensionMismatch, "one problem per subsystem expected");
    }
    std::vector<EdgeOverlap> out;
    for (int i = 0; i < partition.size(); ++i) {
        for (int j : partition.neighbors(i)) {
            if (j <= i) continue;
            const LocalFhocp& pi = problems[static_cast<std::size_t>(i)];
            const LocalFhocp& pj = problems[static_cast<std::size_t>(j)];
            if (pi.layout.horizon != pj.layout.horizon || pi.layout.alpha_dim != pj.layout.alpha_dim) {
                throw Error(ErrorKind::DimensionMismatch, "neighbors disagree on horizon or safe-set size");
            }
            EdgeOverlap e{i, j, {}, {}};
            for (int k = 0; k < pi.layout.horizon; ++k) {
                for (std::size_t a = 0; a < pi.neighborhood.size(); ++a) {
                    const auto it = std::find(pj.neighborhood.begin(), pj.neighborhood.end(), pi.neighborhood[a]);
                    if (it == pj.neighborhood.end()) continue;
                    const int b = static_cast<int>(it - pj.neighborhood.begin());
                    e.in_i.push_back(pi.layout.state(k, static_cast<int>(a)));
                    e.in_j.push_back(pj.layout.state(k, b));
                }
            }
            for (int k = 0; k < pi.layout.alpha_dim; ++k) {
                e.in_i.push_back(pi.layout.alpha.begin + k);
                e.in_j.push_back(pj.layout.alpha.begin + k);
            }
            out.push_back(std::move(e));
        }
    }
    return out;
}

StackedProblem stack_consensus(const std::vector<LocalFhocp>& problems, const std::vector<EdgeOverlap>& overlaps) {
    StackedProblem s;
    int d = 0, me = 0, mi = 0;
    for (const auto& p : problems) {
        s.blocks.push_back({d, p.qp.dim()});
        d += p.qp.dim();
        me += static_cast<int>(p.qp.A_eq.rows());
        mi += static_cast<int>(p.qp.A_in.rows());
        s.offset += p.offset;
    }
    int consensus = 0;
    for (const auto& e : overlaps) consensus += static_cast<int>(e.in_i.size());
    QuadraticProgram& qp = s.qp;
    qp.P = Matrix::Zero(d, d);
    qp.q = Vector::Zero(d);
    qp.A_eq = Matrix::Zero(me + consensus, d);
    qp.b_eq = Vector::Zero(me + consensus);
    qp.A_in = Matrix::Zero(mi, d);
    qp.b_in = Vector::Zero(mi);
    int re = 0, ri = 0;
    for (std::size_t b = 0; b < problems.size(); ++b) {
        const auto& p = problems[b].qp;
        const int off = s.blocks[b].begin;
        const int db = p.dim();
        qp.P.block(off, off, db, db) = p.P;
        qp.q.segment(off, db) = p.q;
        qp.A_eq.block(re, off, p.A_eq.rows(), db) = p.A_eq;
        qp.b_eq.segment(re, p.b_eq.size()) = p.b_eq;
        re += static_cast<int>(p.A_eq.rows());
        qp.A_in.block(ri, off, p.A_in.rows(), db) = p.A_in;
        qp.b_in.segment(ri, p.b_in.size()) = p.b_in;
        ri += static_cast<int>(p.A_in.rows());
    }
    for (const auto& e : overlaps) {
        const int oi = s.blocks[static_cast<std::size_t>(e.i)].begin;
        const int oj = s.blocks[static_cast<std::size_t>(e.j)].begin;
        for (std::size_t k = 0; k < e.in_i.size(); ++k) {
            qp.A_eq(re, oi + e.in_i[k]) = 1.0;
            qp.A_eq(re, oj + e.in_j[k]) = -1.0;
            ++re;
        }
    }
    return s;
}

}  // namespace dlmpc
