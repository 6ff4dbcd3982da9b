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
#ifndef DLMPC_QP_HPP
#define DLMPC_QP_HPP

#include <memory>
#include <optional>
#include <string>

#include "dlmpc/types.hpp"

namespace dlmpc {

/**
 * @brief Convex QP
 *
 *   minimize    0.5 z' P z + q' z
 *   subject to  A_eq z  = b_eq
 *               A_in z <= b_in
 *
 * Matrices are dense at the interface; the solver keeps sparse copies.
 */
struct QuadraticProgram {
    Matrix P;
    Vector q;
    Matrix A_eq;
    Vector b_eq;
    Matrix A_in;
    Vector b_in;

    int dim() const { return static_cast<int>(q.size()); }
    double objective(const Vector& z) const { return 0.5 * z.dot(P * z) + q.dot(z); }
};

enum class QpStatus { Optimal, Infeasible, MaxIter };

const char* to_string(QpStatus status);

struct QpSolution {
    Vector z;
    Vector y_eq;  // multipliers of A_eq z = b_eq
    Vector y_in;  // multipliers of A_in z <= b_in, nonnegative at optimum
    double objective = 0.0;
    QpStatus status = QpStatus::MaxIter;
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    bool polished = false;
};

struct QpSettings {
    int max_iter = 20000;
    double eps_abs = 1e-8;
    double eps_rel = 1e-9;
    double eps_infeasible = 1e-6;
    double rho = 0.1;
    double sigma = 1e-6;
    double alpha = 1.6;      // over-relaxation
    double regularization = 1e-9;  // added to the diagonal of P
    bool adaptive_rho = true;
    int adaptive_rho_interval = 25;
    bool polish = true;
    double polish_delta = 1e-7;
    int polish_refine_iter = 8;
    int check_interval = 5;
};

/**
 * Operator-splitting QP solver (ADMM on the constraint splitting) with
 * over-relaxation and active-set polishing.
 *
 * The KKT factorization is computed in setup() and reused while only the
 * linear cost or the right-hand sides change. The last solution is kept as
 * the warm start for the next solve. Not reentrant.
 */
class QpSolver {
public:
    explicit QpSolver(QpSettings settings = {});
    ~QpSolver();
    QpSolver(QpSolver&&) noexcept;
    QpSolver& operator=(QpSolver&&) noexcept;

    /// Throws Error(InvalidSystem) if P is not symmetric positive semidefinite.
    void setup(const QuadraticProgram& qp);
    bool is_setup() const;

    void update_linear_cost(const Vector& q);
    void update_equality_rhs(const Vector& b_eq);
    void update_inequality_rhs(const Vector& b_in);

    /// Primal warm start; duals are reset.
    void warm_start(const Vector& z);
    /// Drops any stored iterate so the next solve starts cold.
    void cold_start();

    QpSolution solve();

    const QpSettings& settings() const { return settings_; }
    /// Number of numeric KKT factorizations performed so far.
    int factorizations() const;

private:
    struct Impl;
    QpSettings settings_;
    std::unique_ptr<Impl> impl_;
};

/// One-shot convenience wrapper.
QpSolution solve(const QuadraticProgram& qp, const std::optional<Vector>& warm_start = std::nullopt,
                 const QpSettings& settings = {});

/// KKT residuals of a candidate primal-dual point (for checks and tests).
struct KktResiduals {
    double primal = 0.0;          // max equality / inequality violation
    double stationarity = 0.0;    // ||P z + q + A_eq' y_eq + A_in' y_in||_inf
    double dual_sign = 0.0;       // max(-y_in)
    double complementarity = 0.0; // max |y_in .* (A_in z - b_in)|
};

KktResiduals kkt_residuals(const QuadraticProgram& qp, const Vector& z, const Vector& y_eq, const Vector& y_in);

/// Writes the QP to a JSON file for offline inspection.
void dump_qp(const QuadraticProgram& qp, const std::string& path);

}  // namespace dlmpc

#endif  // DLMPC_QP_HPP
