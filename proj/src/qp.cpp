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
#include "dlmpc/qp.hpp"

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>

#include "dlmpc/error.hpp"

namespace dlmpc {

namespace {

using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Triplet = Eigen::Triplet<double, int>;
using Ldlt = Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>>;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEqualityRhoScale = 1e3;
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

void append_dense(std::vector<Triplet>& out, const Matrix& m, int row_offset, int col_offset) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            if (m(r, c) != 0.0) {
                out.emplace_back(static_cast<int>(r) + row_offset, static_cast<int>(c) + col_offset, m(r, c));
            }
        }
    }
}

}  // namespace

const char* to_string(QpStatus status) {
    switch (status) {
        case QpStatus::Optimal: return "Optimal";
        case QpStatus::Infeasible: return "Infeasible";
        case QpStatus::MaxIter: return "MaxIter";
    }
    return "?";
}

struct QpSolver::Impl {
    int n = 0;
    int m = 0;
    int m_eq = 0;

    SpMat P;   // symmetric, as given
    SpMat C;   // [A_eq; A_in]
    SpMat Ct;
    std::vector<Triplet> P_triplets;  // lower triangle of P
    Vector q;
    Vector lower;
    Vector upper;

    double rho = 0.1;
    double regularization = 0.0;
    Vector rho_vec;
    Ldlt kkt;
    int factorizations = 0;
    bool ready = false;

    Vector x, z, y;
    bool has_iterate = false;
    bool has_duals = false;

    // Polishing cache, keyed by the active set.
    std::vector<char> polish_active;
    std::vector<int> polish_rows;
    Ldlt polish_ldlt;
    SpMat polish_K0;
    bool polish_valid = false;
    std::optional<std::vector<char>> last_failed_active;

    void set_rho(double r) {
        rho = std::clamp(r, kRhoMin, kRhoMax);
        rho_vec.resize(m);
        for (int k = 0; k < m; ++k) rho_vec(k) = k < m_eq ? kEqualityRhoScale * rho : rho;
    }

    SpMat build_kkt(double sigma) const {
        // The diagonal regularization only enters the iteration matrix; polishing
        // and residuals use P as given.
        std::vector<Triplet> t;
        t.reserve(P_triplets.size() + static_cast<std::size_t>(C.nonZeros() + n + m));
        for (const auto& e : P_triplets) t.push_back(e);
        for (int i = 0; i < n; ++i) t.emplace_back(i, i, sigma + regularization);
        for (int col = 0; col < C.outerSize(); ++col) {
            for (SpMat::InnerIterator it(C, col); it; ++it) t.emplace_back(n + it.row(), col, it.value());
        }
        for (int k = 0; k < m; ++k) t.emplace_back(n + k, n + k, -1.0 / rho_vec(k));
        SpMat K(n + m, n + m);
        K.setFromTriplets(t.begin(), t.end());
        return K;
    }

    void factorize(double sigma, bool analyze) {
        const SpMat K = build_kkt(sigma);
        if (analyze) kkt.analyzePattern(K);
        kkt.factorize(K);
        ++factorizations;
        if (kkt.info() != Eigen::Success) throw Error(ErrorKind::InvalidSystem, "KKT factorization failed");
    }
};

QpSolver::QpSolver(QpSettings settings) : settings_(settings), impl_(std::make_unique<Impl>()) {}
QpSolver::~QpSolver() = default;
QpSolver::QpSolver(QpSolver&&) noexcept = default;
QpSolver& QpSolver::operator=(QpSolver&&) noexcept = default;

bool QpSolver::is_setup() const { return impl_->ready; }
int QpSolver::factorizations() const { return impl_->factorizations; }

void QpSolver::setup(const QuadraticProgram& qp) {
    Impl& s = *impl_;
    const auto n = qp.q.size();
    if (qp.P.rows() != n || qp.P.cols() != n || qp.A_eq.rows() != qp.b_eq.size() ||
        (qp.A_eq.rows() > 0 && qp.A_eq.cols() != n) || qp.A_in.rows() != qp.b_in.size() ||
        (qp.A_in.rows() > 0 && qp.A_in.cols() != n)) {
        throw Error(ErrorKind::DimensionMismatch, "QP dimensions are inconsistent");
    }
    const double pnorm = n > 0 ? qp.P.cwiseAbs().maxCoeff() : 0.0;
    if (n > 0 && (qp.P - qp.P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, pnorm)) {
        throw Error(ErrorKind::InvalidSystem, "P is not symmetric");
    }

    s.n = static_cast<int>(n);
    s.m_eq = static_cast<int>(qp.A_eq.rows());
    s.m = s.m_eq + static_cast<int>(qp.A_in.rows());

    s.regularization = settings_.regularization;
    s.P_triplets.clear();
    for (Eigen::Index c = 0; c < n; ++c) {
        for (Eigen::Index r = c; r < n; ++r) {
            const double v = qp.P(r, c);
            if (v != 0.0) s.P_triplets.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
        }
    }
    {
        std::vector<Triplet> full;
        for (const auto& e : s.P_triplets) {
            full.push_back(e);
            if (e.row() != e.col()) full.emplace_back(e.col(), e.row(), e.value());
        }
        s.P.resize(s.n, s.n);
        s.P.setFromTriplets(full.begin(), full.end());
    }
    {
        std::vector<Triplet> t;
        append_dense(t, qp.A_eq, 0, 0);
        append_dense(t, qp.A_in, s.m_eq, 0);
        s.C.resize(s.m, s.n);
        s.C.setFromTriplets(t.begin(), t.end());
        s.Ct = s.C.transpose();
    }
    s.q = qp.q;
    s.lower.resize(s.m);
    s.upper.resize(s.m);
    s.lower.head(s.m_eq) = qp.b_eq;
    s.upper.head(s.m_eq) = qp.b_eq;
    s.lower.tail(s.m - s.m_eq).setConstant(-kInf);
    s.upper.tail(s.m - s.m_eq) = qp.b_in;

    s.set_rho(settings_.rho);
    s.factorize(settings_.sigma, true);

    // P + sigma I is positive definite iff the quasi-definite KKT has n positive pivots.
    const Vector D = s.kkt.vectorD();
    const auto positive = (D.array() > 0.0).count();
    if (positive != s.n) throw Error(ErrorKind::InvalidSystem, "P is not positive semidefinite");

    s.has_iterate = false;
    s.has_duals = false;
    s.polish_valid = false;
    s.last_failed_active.reset();
    s.ready = true;
}

void QpSolver::update_linear_cost(const Vector& q) {
    if (q.size() != impl_->n) throw Error(ErrorKind::DimensionMismatch, "linear cost size mismatch");
    impl_->q = q;
}

void QpSolver::update_equality_rhs(const Vector& b_eq) {
    Impl& s = *impl_;
    if (b_eq.size() != s.m_eq) throw Error(ErrorKind::DimensionMismatch, "equality rhs size mismatch");
    s.lower.head(s.m_eq) = b_eq;
    s.upper.head(s.m_eq) = b_eq;
}

void QpSolver::update_inequality_rhs(const Vector& b_in) {
    Impl& s = *impl_;
    if (b_in.size() != s.m - s.m_eq) throw Error(ErrorKind::DimensionMismatch, "inequality rhs size mismatch");
    s.upper.tail(s.m - s.m_eq) = b_in;
}

void QpSolver::warm_start(const Vector& z) {
    Impl& s = *impl_;
    if (z.size() != s.n) throw Error(ErrorKind::DimensionMismatch, "warm start size mismatch");
    s.x = z;
    s.z = (s.C * z).cwiseMax(s.lower).cwiseMin(s.upper);
    s.y = Vector::Zero(s.m);
    s.has_iterate = true;
    s.has_duals = false;
}

void QpSolver::cold_start() {
    impl_->has_iterate = false;
    impl_->has_duals = false;
}

QpSolution QpSolver::solve() {
    Impl& s = *impl_;
    const QpSettings& cfg = settings_;
    const int n = s.n;
    const int m = s.m;

    if (!s.has_iterate) {
        s.x = Vector::Zero(n);
        s.z = Vector::Zero(m).cwiseMax(s.lower).cwiseMin(s.upper);
        s.y = Vector::Zero(m);
        s.has_iterate = true;
        s.has_duals = false;
    }

    QpSolution sol;

    auto finish = [&](QpStatus status, int iters, bool polished, double rp, double rd) {
        sol.z = s.x;
        sol.y_eq = s.y.head(s.m_eq);
        sol.y_in = s.y.tail(m - s.m_eq);
        sol.objective = 0.5 * s.x.dot(s.P * s.x) + s.q.dot(s.x);
        sol.status = status;
        sol.iterations = iters;
        sol.polished = polished;
        sol.primal_residual = rp;
        sol.dual_residual = rd;
        return sol;
    };

    // Tolerances relative to the current iterate.
    auto primal_tol = [&](const Vector& Cx, const Vector& zz) {
        return cfg.eps_abs + cfg.eps_rel * std::max(inf_norm(Cx), inf_norm(zz));
    };
    auto dual_tol = [&](const Vector& Px, const Vector& Cty) {
        return cfg.eps_abs + cfg.eps_rel * std::max({inf_norm(Px), inf_norm(Cty), inf_norm(s.q)});
    };

    // Active-set guess from (z, y), reduced KKT solve, then a full optimality check.
    auto try_polish = [&](double& rp_out, double& rd_out) -> bool {
        std::vector<char> active(static_cast<std::size_t>(m), 0);
        for (int k = 0; k < m; ++k) {
            if (k < s.m_eq) {
                active[static_cast<std::size_t>(k)] = 1;
            } else {
                active[static_cast<std::size_t>(k)] = (s.upper(k) - s.z(k) < s.y(k)) ? 1 : 0;
            }
        }
        if (s.last_failed_active && active == *s.last_failed_active) return false;

        if (!s.polish_valid || active != s.polish_active) {
            std::vector<int> rows;
            for (int k = 0; k < m; ++k)
                if (active[static_cast<std::size_t>(k)]) rows.push_back(k);
            const int na = static_cast<int>(rows.size());
            std::vector<int> map(static_cast<std::size_t>(m), -1);
            for (int a = 0; a < na; ++a) map[static_cast<std::size_t>(rows[static_cast<std::size_t>(a)])] = a;

            std::vector<Triplet> t0;
            t0.reserve(s.P_triplets.size() + static_cast<std::size_t>(s.C.nonZeros()));
            for (const auto& e : s.P_triplets) t0.push_back(e);
            for (int col = 0; col < s.C.outerSize(); ++col) {
                for (SpMat::InnerIterator it(s.C, col); it; ++it) {
                    const int a = map[static_cast<std::size_t>(it.row())];
                    if (a >= 0) t0.emplace_back(n + a, col, it.value());
                }
            }
            std::vector<Triplet> td = t0;
            for (int i = 0; i < n; ++i) td.emplace_back(i, i, cfg.polish_delta);
            for (int a = 0; a < na; ++a) td.emplace_back(n + a, n + a, -cfg.polish_delta);

            SpMat K0(n + na, n + na);
            K0.setFromTriplets(t0.begin(), t0.end());
            SpMat Kd(n + na, n + na);
            Kd.setFromTriplets(td.begin(), td.end());
            s.polish_ldlt.compute(Kd);
            ++s.factorizations;
            if (s.polish_ldlt.info() != Eigen::Success) {
                s.polish_valid = false;
                s.last_failed_active = active;
                return false;
            }
            // Full symmetric K0 for refinement residuals.
            s.polish_K0 = SpMat(K0.selfadjointView<Eigen::Lower>());
            s.polish_rows = std::move(rows);
            s.polish_active = active;
            s.polish_valid = true;
        }

        const int na = static_cast<int>(s.polish_rows.size());
        Vector rhs(n + na);
        rhs.head(n) = -s.q;
        for (int a = 0; a < na; ++a) rhs(n + a) = s.upper(s.polish_rows[static_cast<std::size_t>(a)]);
        Vector sol_kkt = s.polish_ldlt.solve(rhs);
        for (int it = 0; it < cfg.polish_refine_iter; ++it) {
            const Vector r = rhs - s.polish_K0 * sol_kkt;
            if (inf_norm(r) <= 1e-14 * std::max(1.0, inf_norm(rhs))) break;
            sol_kkt += s.polish_ldlt.solve(r);
        }
        if (!sol_kkt.allFinite()) {
            s.last_failed_active = active;
            return false;
        }

        const Vector xp = sol_kkt.head(n);
        Vector yp = Vector::Zero(m);
        for (int a = 0; a < na; ++a) yp(s.polish_rows[static_cast<std::size_t>(a)]) = sol_kkt(n + a);

        const Vector Cx = s.C * xp;
        const Vector zp = Cx.cwiseMax(s.lower).cwiseMin(s.upper);
        const Vector Px = s.P * xp;
        const Vector Cty = s.Ct * yp;
        const double rp = inf_norm(Cx - zp);
        const double rd = inf_norm(Px + s.q + Cty);
        double sign_violation = 0.0;
        for (int k = s.m_eq; k < m; ++k) sign_violation = std::max(sign_violation, -yp(k));

        const double tp = primal_tol(Cx, zp);
        const double td = dual_tol(Px, Cty);
        if (rp <= tp && rd <= td && sign_violation <= td) {
            s.x = xp;
            s.y = yp;
            s.z = zp;
            s.has_duals = true;
            rp_out = rp;
            rd_out = rd;
            return true;
        }
        s.last_failed_active = active;
        return false;
    };

    double rp = 0.0;
    double rd = 0.0;
    if (cfg.polish && s.has_duals && try_polish(rp, rd)) {
        return finish(QpStatus::Optimal, 0, true, rp, rd);
    }

    Vector rhs(n + m);
    Vector y_prev = s.y;
    for (int iter = 1; iter <= cfg.max_iter; ++iter) {
        rhs.head(n) = cfg.sigma * s.x - s.q;
        rhs.tail(m) = s.z - s.y.cwiseQuotient(s.rho_vec);
        const Vector sol_kkt = s.kkt.solve(rhs);
        const Vector x_tilde = sol_kkt.head(n);
        const Vector z_tilde = s.z + (sol_kkt.tail(m) - s.y).cwiseQuotient(s.rho_vec);

        s.x = cfg.alpha * x_tilde + (1.0 - cfg.alpha) * s.x;
        const Vector z_relaxed = cfg.alpha * z_tilde + (1.0 - cfg.alpha) * s.z;
        const Vector z_new = (z_relaxed + s.y.cwiseQuotient(s.rho_vec)).cwiseMax(s.lower).cwiseMin(s.upper);
        y_prev = s.y;
        s.y += s.rho_vec.cwiseProduct(z_relaxed - z_new);
        s.z = z_new;
        s.has_duals = true;

        const bool check = (iter % cfg.check_interval == 0) || iter == cfg.max_iter;
        if (!check) continue;

        const Vector Cx = s.C * s.x;
        const Vector Px = s.P * s.x;
        const Vector Cty = s.Ct * s.y;
        rp = inf_norm(Cx - s.z);
        rd = inf_norm(Px + s.q + Cty);
        const double tp = primal_tol(Cx, s.z);
        const double td = dual_tol(Px, Cty);

        if (rp <= tp && rd <= td) {
            double prp = 0.0, prd = 0.0;
            if (cfg.polish && try_polish(prp, prd)) return finish(QpStatus::Optimal, iter, true, prp, prd);
            return finish(QpStatus::Optimal, iter, false, rp, rd);
        }
        if (cfg.polish) {
            double prp = 0.0, prd = 0.0;
            if (try_polish(prp, prd)) return finish(QpStatus::Optimal, iter, true, prp, prd);
        }

        // Primal infeasibility certificate from the last dual step.
        const Vector dy = s.y - y_prev;
        const double dy_norm = inf_norm(dy);
        if (dy_norm > 1e-12) {
            bool valid = true;
            double support = 0.0;
            for (int k = 0; k < m && valid; ++k) {
                if (dy(k) > 0.0) {
                    if (std::isinf(s.upper(k))) valid = false; else support += s.upper(k) * dy(k);
                } else if (dy(k) < 0.0) {
                    if (std::isinf(s.lower(k))) valid = false; else support += s.lower(k) * dy(k);
                }
            }
            if (valid && inf_norm(s.Ct * dy) <= cfg.eps_infeasible * dy_norm &&
                support <= -cfg.eps_infeasible * dy_norm) {
                return finish(QpStatus::Infeasible, iter, false, rp, rd);
            }
        }

        if (cfg.adaptive_rho && iter % cfg.adaptive_rho_interval == 0) {
            const double prim_scale = std::max({inf_norm(Cx), inf_norm(s.z), 1e-12});
            const double dual_scale = std::max({inf_norm(Px), inf_norm(Cty), inf_norm(s.q), 1e-12});
            const double ratio = std::sqrt((rp / prim_scale) / std::max(rd / dual_scale, 1e-30));
            const double candidate = std::clamp(s.rho * ratio, kRhoMin, kRhoMax);
            if (candidate > 5.0 * s.rho || candidate < 0.2 * s.rho) {
                s.set_rho(candidate);
                s.factorize(cfg.sigma, false);
            }
        }
    }
    return finish(QpStatus::MaxIter, cfg.max_iter, false, rp, rd);
}

QpSolution solve(const QuadraticProgram& qp, const std::optional<Vector>& warm_start, const QpSettings& settings) {
    QpSolver solver(settings);
    solver.setup(qp);
    if (warm_start) solver.warm_start(*warm_start);
    return solver.solve();
}

KktResiduals kkt_residuals(const QuadraticProgram& qp, const Vector& z, const Vector& y_eq, const Vector& y_in) {
    KktResiduals r;
    Vector grad = qp.P * z + qp.q;
    if (qp.A_eq.rows() > 0) {
        r.primal = std::max(r.primal, inf_norm(qp.A_eq * z - qp.b_eq));
        grad += qp.A_eq.transpose() * y_eq;
    }
    if (qp.A_in.rows() > 0) {
        const Vector slack = qp.A_in * z - qp.b_in;
        r.primal = std::max(r.primal, std::max(0.0, slack.maxCoeff()));
        grad += qp.A_in.transpose() * y_in;
        r.dual_sign = std::max(0.0, (-y_in).maxCoeff());
        r.complementarity = inf_norm(y_in.cwiseProduct(slack));
    }
    r.stationarity = inf_norm(grad);
    return r;
}

void dump_qp(const QuadraticProgram& qp, const std::string& path) {
    auto mat = [](const Matrix& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
            rows.push_back(std::move(row));
        }
        return rows;
    };
    auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    nlohmann::json j;
    j["schema"] = "dlmpc.qp/1";
    j["P"] = mat(qp.P);
    j["q"] = vec(qp.q);
    j["A_eq"] = mat(qp.A_eq);
    j["b_eq"] = vec(qp.b_eq);
    j["A_in"] = mat(qp.A_in);
    j["b_in"] = vec(qp.b_in);
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Config, "cannot write " + path);
    out << j.dump(1) << '\n';
}

}  // namespace dlmpc
