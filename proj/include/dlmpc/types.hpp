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
#ifndef DLMPC_TYPES_HPP
#define DLMPC_TYPES_HPP

#include <Eigen/Dense>

#include <vector>

namespace dlmpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Sorted list of indices into a global state or input vector.
using IndexList = std::vector<int>;

/// Gathers `v[indices]` into a new vector.
inline Vector select(const Vector& v, const IndexList& indices) {
    Vector out(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t k = 0; k < indices.size(); ++k) out(static_cast<Eigen::Index>(k)) = v(indices[k]);
    return out;
}

/// Gathers the submatrix with the given rows and columns.
inline Matrix select(const Matrix& m, const IndexList& rows, const IndexList& cols) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m(rows[r], cols[c]);
        }
    }
    return out;
}

}  // namespace dlmpc

#endif  // DLMPC_TYPES_HPP
