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
#ifndef DLMPC_TESTS_FIXTURES_HPP
#define DLMPC_TESTS_FIXTURES_HPP

#include <random>
#include <vector>

#include "dlmpc/model.hpp"

namespace fixture {

using dlmpc::Matrix;
using dlmpc::Vector;

/// Three coupled double-integrator-like subsystems in a ring, with coupled
/// position constraints between 1-2 and 2-3.
inline dlmpc::GlobalSystem three_subsystem_plant() {
    dlmpc::GlobalSystem s;
    Matrix A11(2, 2), A22(2, 2), A33(2, 2), C(2, 2);
    A11 << 1.0, 0.5, 0.0, 1.1;
    A22 << 1.05, 0.6, 0.0, 1.0;
    A33 << 1.0, 0.55, 0.0, 1.05;
    C << -0.1, -0.2, 0.0, -0.3;
    s.A = Matrix::Zero(6, 6);
    s.A.block(0, 0, 2, 2) = A11;
    s.A.block(0, 2, 2, 2) = C;
    s.A.block(2, 2, 2, 2) = A22;
    s.A.block(2, 4, 2, 2) = C;
    s.A.block(4, 0, 2, 2) = C;
    s.A.block(4, 4, 2, 2) = A33;
    s.B = Matrix::Zero(6, 3);
    s.B(1, 0) = 1.0;
    s.B(3, 1) = 1.0;
    s.B(5, 2) = 1.0;

    // |x_k| <= 5, |x11 - x21| <= 0.9, |x21 - x31| <= 0.9
    s.G = Matrix::Zero(16, 6);
    s.g = Vector::Zero(16);
    for (int k = 0; k < 6; ++k) {
        s.G(2 * k, k) = 1.0;
        s.G(2 * k + 1, k) = -1.0;
        s.g(2 * k) = 5.0;
        s.g(2 * k + 1) = 5.0;
    }
    s.G(12, 0) = 1.0;  s.G(12, 2) = -1.0;
    s.G(13, 0) = -1.0; s.G(13, 2) = 1.0;
    s.G(14, 2) = 1.0;  s.G(14, 4) = -1.0;
    s.G(15, 2) = -1.0; s.G(15, 4) = 1.0;
    s.g.tail(4).setConstant(0.9);

    s.L = Matrix::Zero(6, 3);
    s.l = Vector::Constant(6, 3.0);
    for (int k = 0; k < 3; ++k) {
        s.L(2 * k, k) = 1.0;
        s.L(2 * k + 1, k) = -1.0;
    }
    s.x_target = Vector::Zero(6);
    s.x_start = Vector(6);
    s.x_start << -5.0, 0.0, -4.5, 0.0, -4.0, 0.0;
    return s;
}

inline dlmpc::Partition three_subsystem_partition() {
    return dlmpc::Partition({{0, 2, 0, 1}, {2, 2, 1, 1}, {4, 2, 2, 1}}, {{1, 2}, {0, 2}, {0, 1}});
}

inline dlmpc::PartitionedSystem three_subsystem_system(double state_weight = 1.0) {
    auto partition = three_subsystem_partition();
    std::vector<Matrix> Q(3, state_weight * Matrix::Identity(2, 2));
    std::vector<Matrix> R(3, Matrix::Identity(1, 1));
    auto cost = dlmpc::StageCost::separable(partition, Q, R);
    return dlmpc::PartitionedSystem::create(three_subsystem_plant(), partition, cost);
}

/// Random stable-ish chain of M subsystems with n_i states and one input each,
/// box constraints, a coupled row between consecutive first states, and
/// a separable cost. Coupling only between chain neighbors.
inline dlmpc::PartitionedSystem random_chain(std::mt19937_64& rng, int M, int n_i = 2, double box = 4.0) {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const int n = M * n_i;
    dlmpc::GlobalSystem s;
    s.A = Matrix::Zero(n, n);
    s.B = Matrix::Zero(n, M);
    std::vector<dlmpc::Block> blocks;
    std::vector<std::vector<int>> nbrs(static_cast<std::size_t>(M));
    for (int i = 0; i < M; ++i) {
        blocks.push_back({i * n_i, n_i, i, 1});
        // Integrator chain with mild instability and a random coupling.
        for (int r = 0; r < n_i; ++r) {
            s.A(i * n_i + r, i * n_i + r) = 1.0 + 0.05 * unif(rng);
            if (r + 1 < n_i) s.A(i * n_i + r, i * n_i + r + 1) = 0.5 + 0.2 * unif(rng);
        }
        s.B(i * n_i + n_i - 1, i) = 1.0;
        if (i + 1 < M) {
            for (int r = 0; r < n_i; ++r)
                for (int c = 0; c < n_i; ++c) s.A(i * n_i + r, (i + 1) * n_i + c) = 0.08 * unif(rng);
            nbrs[static_cast<std::size_t>(i)].push_back(i + 1);
        }
    }
    const int rows = 2 * n + 2 * (M - 1);
    s.G = Matrix::Zero(rows, n);
    s.g = Vector::Constant(rows, box);
    for (int k = 0; k < n; ++k) {
        s.G(2 * k, k) = 1.0;
        s.G(2 * k + 1, k) = -1.0;
    }
    for (int i = 0; i + 1 < M; ++i) {
        const int r = 2 * n + 2 * i;
        s.G(r, i * n_i) = 1.0;
        s.G(r, (i + 1) * n_i) = -1.0;
        s.G(r + 1, i * n_i) = -1.0;
        s.G(r + 1, (i + 1) * n_i) = 1.0;
        s.g(r) = s.g(r + 1) = 1.5;
    }
    s.L = Matrix::Zero(2 * M, M);
    s.l = Vector::Constant(2 * M, 2.0);
    for (int i = 0; i < M; ++i) {
        s.L(2 * i, i) = 1.0;
        s.L(2 * i + 1, i) = -1.0;
    }
    s.x_target = Vector::Zero(n);
    s.x_start = Vector::Zero(n);
    for (int i = 0; i < M; ++i) s.x_start(i * n_i) = 0.6 * unif(rng);
    dlmpc::Partition partition(blocks, nbrs);
    std::vector<Matrix> Q(static_cast<std::size_t>(M), Matrix::Identity(n_i, n_i));
    std::vector<Matrix> R(static_cast<std::size_t>(M), Matrix::Identity(1, 1));
    return dlmpc::PartitionedSystem::create(s, partition, dlmpc::StageCost::separable(partition, Q, R));
}

}  // namespace fixture

#endif  // DLMPC_TESTS_FIXTURES_HPP
