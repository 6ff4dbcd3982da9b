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

#include "dlmpc/error.hpp"
#include "dlmpc/model.hpp"
#include "support/fixtures.hpp"

using namespace dlmpc;

TEST_CASE("ring system validates and decomposes") {
    const auto sys = fixture::three_subsystem_system();
    REQUIRE(validate(sys.global, sys.partition).ok());
    REQUIRE(sys.locals.size() == 3);

    const auto& l0 = sys.locals[0];
    CHECK(l0.neighborhood == IndexList{0, 1, 2, 3, 4, 5});
    CHECK(l0.A_N.rows() == 2);
    CHECK(l0.A_N.cols() == 6);
    Matrix coupling(2, 2);
    coupling << -0.1, -0.2, 0.0, -0.3;
    CHECK((l0.A_N.block(0, 2, 2, 2) - coupling).norm() == 0.0);
    CHECK(l0.B(1, 0) == 1.0);

    // Both coupled rows are owned by the lowest-index subsystem covering them.
    int coupled_rows = 0;
    for (int r : l0.state_rows) coupled_rows += r >= 12 ? 1 : 0;
    CHECK(coupled_rows == 4);
}

TEST_CASE("single block is the global system") {
    const auto base = fixture::three_subsystem_plant();
    const auto partition = Partition::single(6, 3);
    REQUIRE(validate(base, partition).ok());
    const auto sys = PartitionedSystem::create(
        base, partition, StageCost::separable(partition, {Matrix::Identity(6, 6)}, {Matrix::Identity(3, 3)}));
    const auto& l = sys.locals[0];
    CHECK((l.A_N - base.A).norm() == 0.0);
    CHECK((l.B - base.B).norm() == 0.0);
    CHECK(l.G_N.rows() == base.G.rows());
}

TEST_CASE("input coupling is reported") {
    auto base = fixture::three_subsystem_plant();
    base.B(0, 1) = 0.3;  // input of block 2 drives a state of block 1
    const auto report = validate(base, fixture::three_subsystem_partition());
    CHECK(report.has(ViolationKind::InputCoupling));
    CHECK_THROWS_AS(PartitionedSystem::create(base, fixture::three_subsystem_partition(),
                                              StageCost::separable(fixture::three_subsystem_partition(),
                                                                   std::vector<Matrix>(3, Matrix::Identity(2, 2)),
                                                                   std::vector<Matrix>(3, Matrix::Identity(1, 1)))),
                    Error);
}

TEST_CASE("missing neighbor and disconnected graph are reported") {
    auto base = fixture::three_subsystem_plant();
    base.A.block(0, 2, 2, 2).setZero();
    base.A.block(2, 4, 2, 2).setZero();
    base.A.block(4, 0, 2, 2).setZero();
    base.G.bottomRows(4).setZero();
    base.g.tail(4).setOnes();
    Partition isolated({{0, 2, 0, 1}, {2, 2, 1, 1}, {4, 2, 2, 1}}, {{}, {}, {}});
    const auto report = validate(base, isolated);
    CHECK(report.has(ViolationKind::DisconnectedGraph));
    CHECK_FALSE(report.has(ViolationKind::MissingNeighbor));

    const auto coupled = fixture::three_subsystem_plant();
    const auto report2 = validate(coupled, isolated);
    CHECK(report2.has(ViolationKind::MissingNeighbor));
}

TEST_CASE("coupled row in a two-subsystem chain") {
    GlobalSystem s;
    s.A = Matrix::Identity(4, 4);
    s.B = Matrix::Zero(4, 2);
    s.B(1, 0) = s.B(3, 1) = 1.0;
    s.G = Matrix::Zero(1, 4);
    s.G(0, 0) = 1.0;
    s.G(0, 2) = -1.0;
    s.g = Vector::Constant(1, 0.9);
    s.L = Matrix::Zero(0, 2);
    s.l = Vector::Zero(0);
    s.x_target = Vector::Zero(4);
    s.x_start = Vector::Zero(4);
    Partition p({{0, 2, 0, 1}, {2, 2, 1, 1}}, {{1}, {}});
    const auto locals = decompose(s, p, StageCost::separable(p, {Matrix::Identity(2, 2), Matrix::Identity(2, 2)},
                                                            {Matrix::Identity(1, 1), Matrix::Identity(1, 1)}));
    REQUIRE(locals[0].G_N.rows() == 1);
    CHECK(locals[1].G_N.rows() == 0);
    // The restricted row reproduces the global one on sampled box vertices.
    for (int mask = 0; mask < 16; ++mask) {
        Vector x(4);
        for (int k = 0; k < 4; ++k) x(k) = (mask >> k) & 1 ? 2.0 : -2.0;
        const Vector xn = select(x, locals[0].neighborhood);
        CHECK((locals[0].G_N * xn)(0) == doctest::Approx((s.G * x)(0)));
    }
}

TEST_CASE("unassignable constraint row") {
    GlobalSystem s;
    s.A = Matrix::Identity(4, 4);
    s.B = Matrix::Identity(4, 4);
    s.G = Matrix::Zero(1, 4);
    s.G(0, 0) = 1.0;
    s.G(0, 3) = 1.0;
    s.g = Vector::Ones(1);
    s.L = Matrix::Zero(0, 4);
    s.l = Vector::Zero(0);
    s.x_target = Vector::Zero(4);
    s.x_start = Vector::Zero(4);
    // Chain 0-1-2-3: no neighborhood contains both 0 and 3.
    Partition chain({{0, 1, 0, 1}, {1, 1, 1, 1}, {2, 1, 2, 1}, {3, 1, 3, 1}}, {{1}, {2}, {3}, {}});
    CHECK(validate(s, chain).has(ViolationKind::MissingNeighbor));
    std::vector<Matrix> Q(4, Matrix::Identity(1, 1));
    CHECK_THROWS_AS(decompose(s, chain, StageCost::separable(chain, Q, Q)), Error);
}

TEST_CASE("step matches stacked local steps") {
    const auto sys = fixture::three_subsystem_system();
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 50; ++trial) {
        Vector x(6), u(3);
        for (int k = 0; k < 6; ++k) x(k) = nd(rng);
        for (int k = 0; k < 3; ++k) u(k) = nd(rng);
        const Vector global = step(sys.global, x, u);
        std::vector<Vector> parts;
        for (const auto& l : sys.locals) parts.push_back(local_step(l, select(x, l.neighborhood), select(u, l.inputs)));
        CHECK((assemble_states(sys.partition, parts) - global).norm() == 0.0);
    }
    Vector e1 = Vector::Zero(6);
    e1(0) = 1.0;
    CHECK((step(sys.global, e1, Vector::Zero(3)) - sys.global.A.col(0)).norm() == 0.0);
    CHECK(step(sys.global, sys.global.x_target, Vector::Zero(3)).norm() == 0.0);
}

TEST_CASE("stage cost sums over subsystems") {
    const auto sys = fixture::three_subsystem_system();
    CHECK(stage_cost(sys, Vector::Zero(6), Vector::Zero(3)).total == 0.0);
    const auto ones = stage_cost(sys, Vector::Ones(6), Vector::Zero(3));
    CHECK(ones.total == 6.0);
    Vector x(6), u(3);
    x << 0.3, -1.2, 2.0, 0.1, -0.7, 0.4;
    u << 1.0, -0.5, 0.25;
    const auto v = stage_cost(sys, x, u);
    double sum = 0.0;
    for (double c : v.per_subsystem) sum += c;
    CHECK(v.total == sum);
    CHECK(v.total == doctest::Approx(x.squaredNorm() + u.squaredNorm()));
}

TEST_CASE("cost reconstruction and scaling") {
    const auto sys = fixture::three_subsystem_system();
    const auto [Q, R] = sys.cost.reconstruct(sys.partition, 6, 3);
    CHECK((Q - Matrix::Identity(6, 6)).norm() == 0.0);
    CHECK((R - Matrix::Identity(3, 3)).norm() == 0.0);
    const auto scaled = sys.cost.scaled_states(0.5);
    CHECK(scaled.Q[0](0, 0) == 0.5);
    CHECK(scaled.R[0](0, 0) == 1.0);
}

TEST_CASE("decomposition preserves every constraint row") {
    std::mt19937_64 rng(2);
    for (int M = 2; M <= 4; ++M) {
        const auto sys = fixture::random_chain(rng, M);
        int total = 0;
        for (const auto& l : sys.locals) {
            total += static_cast<int>(l.G_N.rows());
            for (int r = 0; r < l.G_N.rows(); ++r) {
                const int row = l.state_rows[static_cast<std::size_t>(r)];
                Vector padded = Vector::Zero(sys.global.state_dim());
                for (int c = 0; c < l.neighborhood_dim(); ++c) padded(l.neighborhood[static_cast<std::size_t>(c)]) = l.G_N(r, c);
                CHECK((padded.transpose() - sys.global.G.row(row)).norm() == 0.0);
            }
        }
        CHECK(total == sys.global.G.rows());
    }
}
