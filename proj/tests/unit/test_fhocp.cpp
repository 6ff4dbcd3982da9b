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
#include <doctest.h>

#include <random>

#include "dlmpc/admm.hpp"
#include "dlmpc/controller.hpp"
#include "dlmpc/error.hpp"
#include "dlmpc/fhocp.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace dlmpc;

namespace {

/// Target column plus two synthetic iterations so alpha has more than one entry.
SafeSetStore synthetic_store(const PartitionedSystem& sys) {
    SafeSetStore store = make_store(sys, RunConfig{});
    store.seed_with_targets(0);
    for (int id = 1; id <= 2; ++id) {
        for (int i = 0; i < sys.size(); ++i) {
            std::vector<Vector> xs, us;
            std::vector<double> h;
            for (int t = 0; t < 3; ++t) {
                const double s = (id == 1 ? 0.4 : -0.3) * (2 - t) / 2.0 * (1.0 + 0.1 * i);
                Vector x(2);
                x << s, 0.5 * s;
                xs.push_back(x);
                us.push_back(Vector::Zero(1));
                h.push_back(x.squaredNorm());
            }
            store.add_trajectory(i, id, xs, us, h);
        }
    }
    return store;
}

Vector small_state() {
    Vector x(6);
    x << 0.3, -0.1, 0.2, 0.05, -0.25, 0.1;
    return x;
}

}  // namespace

TEST_CASE("layout indexes states, alpha and inputs without overlap") {
    const DecisionLayout L(3, 6, {2, 3}, 1, 4);
    CHECK(L.x_traj.begin == 0);
    CHECK(L.x_traj.size == 3 * 6 + 2);
    CHECK(L.alpha.begin == L.x_traj.end());
    CHECK(L.u_traj.begin == L.alpha.end());
    CHECK(L.dim() == 20 + 4 + 3);
    CHECK(L.state(1, 2) == 8);
    CHECK(L.own_state(1, 0) == L.state(1, 2));
    CHECK(L.own_state(3, 1) == 19);
    CHECK(L.input(2, 0) == L.u_traj.begin + 2);
}

TEST_CASE("stacked local problems reproduce the centralized optimum") {
    const auto sys = fixture::three_subsystem_system();
    const SafeSetStore store = synthetic_store(sys);
    Controller ctl(sys, RunConfig{});
    for (int N : {2, 3, 4}) {
        CAPTURE(N);
        FhocpOptions opts;
        opts.horizon = N;
        const auto locals = ctl.local_problems(small_state(), &store, opts);
        const StackedProblem stacked = stack_consensus(locals, edge_overlaps(locals, sys.partition));
        const QpSolution s = solve(stacked.qp);
        REQUIRE(s.status == QpStatus::Optimal);

        const LocalFhocp central = build_centralized(sys, store, small_state(), opts);
        const QpSolution c = solve(central.qp);
        REQUIRE(c.status == QpStatus::Optimal);
        CHECK(s.objective + stacked.offset == doctest::Approx(c.objective + central.offset).epsilon(1e-7));
    }
}

TEST_CASE("a single block gives the centralized problem") {
    const auto base = fixture::three_subsystem_plant();
    const auto partition = Partition::single(6, 3);
    const auto sys = PartitionedSystem::create(
        base, partition, StageCost::separable(partition, {Matrix::Identity(6, 6)}, {Matrix::Identity(3, 3)}));
    SafeSetStore store = make_store(sys, RunConfig{});
    store.seed_with_targets(0);
    FhocpOptions opts;
    const LocalFhocp local = build_local(sys.locals[0], nullptr, small_state(), {4, false, 1.0, 0.0});
    const LocalFhocp central = build_centralized(sys, store, small_state(), opts);
    CHECK(local.qp.dim() + 1 == central.qp.dim());
    const QpSolution a = solve(central.qp);
    REQUIRE(a.status == QpStatus::Optimal);
    // Terminal at the single stored point: the own terminal state is the target.
    CHECK(a.z.segment(central.layout.x_traj.begin + 4 * 6, 6).norm() < 1e-8);
}

TEST_CASE("initial state update matches a rebuild") {
    const auto sys = fixture::three_subsystem_system();
    const SafeSetStore store = synthetic_store(sys);
    const SafeSetData d = store.safe_set_matrix(1);
    const auto& loc = sys.locals[1];
    Vector x0 = Vector::Zero(loc.neighborhood_dim());
    Vector x1 = Vector::Constant(loc.neighborhood_dim(), 0.1);
    LocalFhocp p = build_local(loc, &d, x0, FhocpOptions{});
    set_initial_state(p, x1);
    const LocalFhocp q = build_local(loc, &d, x1, FhocpOptions{});
    CHECK(p.qp.b_eq == q.qp.b_eq);
    CHECK(p.qp.q == q.qp.q);
    CHECK(p.offset == doctest::Approx(q.offset));
}

TEST_CASE("terminal set requires safe-set data") {
    const auto sys = fixture::three_subsystem_system();
    CHECK_THROWS_AS(build_local(sys.locals[0], nullptr, Vector::Zero(6), FhocpOptions{}), Error);
}

TEST_CASE("edge overlaps cover the shared states and alpha") {
    const auto sys = fixture::three_subsystem_system();
    const SafeSetStore store = synthetic_store(sys);
    Controller ctl(sys, RunConfig{});
    const auto locals = ctl.local_problems(small_state(), &store, FhocpOptions{});
    const auto edges = edge_overlaps(locals, sys.partition);
    REQUIRE(edges.size() == 3);
    for (const auto& e : edges) {
        CHECK(e.in_i.size() == e.in_j.size());
        // Full ring: every neighborhood is the whole plant, so all 6 states over 4 steps plus alpha.
        CHECK(e.in_i.size() == static_cast<std::size_t>(4 * 6 + store.size()));
    }
}

TEST_CASE("consensus matches the stacked QP on random chains") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 6; ++trial) {
        const int M = 2 + trial % 3;
        CAPTURE(trial);
        const auto sys = fixture::random_chain(rng, M);
        SafeSetStore store = make_store(sys, RunConfig{});
        store.seed_with_targets(0);
        Controller ctl(sys, RunConfig{});
        FhocpOptions opts;
        opts.horizon = 5;
        const auto locals = ctl.local_problems(sys.global.x_start, &store, opts);
        const auto edges = edge_overlaps(locals, sys.partition);
        const StackedProblem stacked = stack_consensus(locals, edges);
        const QpSolution ref = solve(stacked.qp);
        REQUIRE(ref.status == QpStatus::Optimal);

        ConsensusSettings cs;
        cs.eps_consensus = 1e-8;
        cs.max_iter = 20000;
        SynchronousTransport transport;
        const ConsensusResult res = run_consensus(locals, edges, cs, transport);
        REQUIRE(res.report.status == ConsensusStatus::Converged);
        const double optimum = ref.objective + stacked.offset;
        CHECK(res.report.objectives.back() == doctest::Approx(optimum).epsilon(1e-4));
        CHECK(res.report.final_residual() <= 1e-8);
    }
}

TEST_CASE("sequential and concurrent schedules produce the same run") {
    const auto sys = fixture::three_subsystem_system();
    const SafeSetStore store = synthetic_store(sys);
    Controller ctl(sys, RunConfig{});
    const auto locals = ctl.local_problems(small_state(), &store, FhocpOptions{});
    const auto edges = edge_overlaps(locals, sys.partition);
    ConsensusSettings cs;
    SynchronousTransport t1, t2;
    const ConsensusResult a = run_consensus(locals, edges, cs, t1);
    cs.schedule = Schedule::Concurrent;
    const ConsensusResult b = run_consensus(locals, edges, cs, t2);
    CHECK(a.report == b.report);
    for (std::size_t i = 0; i < a.solutions.size(); ++i) CHECK(a.solutions[i] == b.solutions[i]);
}

TEST_CASE("one agent converges without communication") {
    const auto base = fixture::three_subsystem_plant();
    const auto partition = Partition::single(6, 3);
    const auto sys = PartitionedSystem::create(
        base, partition, StageCost::separable(partition, {Matrix::Identity(6, 6)}, {Matrix::Identity(3, 3)}));
    SafeSetStore store = make_store(sys, RunConfig{});
    store.seed_with_targets(0);
    Controller ctl(sys, RunConfig{});
    const auto locals = ctl.local_problems(small_state(), &store, FhocpOptions{});
    SynchronousTransport t;
    const ConsensusResult r = run_consensus(locals, edge_overlaps(locals, sys.partition), ConsensusSettings{}, t);
    CHECK(r.report.status == ConsensusStatus::Converged);
    CHECK(r.report.iterations == 0);
    CHECK(r.report.local_solves == 1);
}

TEST_CASE("consensus tolerates dropped and delayed messages") {
    const auto sys = fixture::three_subsystem_system();
    const SafeSetStore store = synthetic_store(sys);
    Controller ctl(sys, RunConfig{});
    const auto locals = ctl.local_problems(small_state(), &store, FhocpOptions{});
    const auto edges = edge_overlaps(locals, sys.partition);
    ConsensusSettings cs;
    cs.eps_consensus = 1e-6;
    SynchronousTransport clean;
    const ConsensusResult ref = run_consensus(locals, edges, cs, clean);
    LossyTransport lossy(0.2, 2, 7);
    const ConsensusResult res = run_consensus(locals, edges, cs, lossy);
    CHECK(lossy.dropped() > 0);
    REQUIRE(res.report.status == ConsensusStatus::Converged);
    CHECK(res.report.final_residual() <= cs.eps_consensus);
    // A consensus point is feasible for the stacked problem, so it cannot beat the optimum.
    CHECK(res.report.objectives.back() >= ref.report.objectives.back() - 1e-4);

    LossyTransport perfect(0.0, 0, 7);
    const ConsensusResult same = run_consensus(locals, edges, cs, perfect);
    CHECK(same.report == ref.report);
}

TEST_CASE("consensus residual shrinks over the run") {
    const auto sys = fixture::three_subsystem_system();
    const SafeSetStore store = synthetic_store(sys);
    Controller ctl(sys, RunConfig{});
    const auto locals = ctl.local_problems(small_state(), &store, FhocpOptions{});
    SynchronousTransport t;
    const ConsensusResult r = run_consensus(locals, edge_overlaps(locals, sys.partition), ConsensusSettings{}, t);
    REQUIRE(r.report.status == ConsensusStatus::Converged);
    const auto& res = r.report.residuals;
    REQUIRE(res.size() >= 2);
    auto worst = [](const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); };
    CHECK(worst(res.back()) < 1e-3 * std::max(1.0, worst(res.front())));
}

TEST_CASE("at the target the applied input is zero") {
    const auto sys = fixture::three_subsystem_system();
    const SafeSetStore store = synthetic_store(sys);
    Controller ctl(sys, RunConfig{});
    const TimeStepResult step = ctl.run_time_step(sys.global.x_target, store);
    CHECK(step.report.status == ConsensusStatus::Converged);
    CHECK(step.input.norm() < 1e-5);
    CHECK((step.next_state - sys.global.x_target).norm() < 1e-5);
    CHECK(step.fhocp_cost == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("an unreachable terminal set reports a local failure") {
    const auto sys = fixture::three_subsystem_system();
    SafeSetStore store = make_store(sys, RunConfig{});
    store.seed_with_targets(0);
    Controller ctl(sys, RunConfig{});
    FhocpOptions opts;
    opts.horizon = 1;
    const auto locals = ctl.local_problems(sys.global.x_start, &store, opts);
    SynchronousTransport t;
    const ConsensusResult r = run_consensus(locals, edge_overlaps(locals, sys.partition), ConsensusSettings{}, t);
    CHECK(r.report.status == ConsensusStatus::LocalInfeasible);
    CHECK(r.report.failed_agent >= 0);
}
