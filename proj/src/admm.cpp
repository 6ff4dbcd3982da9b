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
#include "dlmpc/admm.hpp"

#include <algorithm>
#include <atomic>
#include <barrier>
#include <exception>
#include <thread>

#include "dlmpc/error.hpp"

namespace dlmpc {

// ---------------------------------------------------------------------------
// Transports

void SynchronousTransport::send(Message message) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto key = std::make_pair(message.receiver, message.sender);
    auto it = latest_.find(key);
    if (it == latest_.end() || it->second.iteration <= message.iteration) latest_[key] = std::move(message);
}

std::optional<Message> SynchronousTransport::receive(int receiver, int sender, int iteration) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = latest_.find({receiver, sender});
    if (it == latest_.end() || it->second.iteration > iteration) return std::nullopt;
    return it->second;
}

void SynchronousTransport::reset() {
    std::lock_guard<std::mutex> lock(mutex_);
    latest_.clear();
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

LossyTransport::LossyTransport(double drop_probability, int max_delay, std::uint64_t seed)
    : drop_probability_(drop_probability), max_delay_(std::max(max_delay, 0)), seed_(seed) {}

void LossyTransport::send(Message message) {
    std::uint64_t h = splitmix64(seed_);
    h = splitmix64(h ^ static_cast<std::uint64_t>(message.sender));
    h = splitmix64(h ^ (static_cast<std::uint64_t>(message.receiver) << 20));
    h = splitmix64(h ^ (static_cast<std::uint64_t>(message.iteration) << 40));
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    std::lock_guard<std::mutex> lock(mutex_);
    if (u < drop_probability_) {
        ++dropped_;
        return;
    }
    const int delay = static_cast<int>(splitmix64(h) % static_cast<std::uint64_t>(max_delay_ + 1));
    in_flight_[{message.receiver, message.sender}].emplace(message.iteration + delay, std::move(message));
}

std::optional<Message> LossyTransport::receive(int receiver, int sender, int iteration) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = in_flight_.find({receiver, sender});
    if (it == in_flight_.end()) return std::nullopt;
    auto& queue = it->second;
    // Keep only the newest visible message; discard older visible ones.
    std::optional<Message> best;
    for (auto m = queue.begin(); m != queue.end() && m->first <= iteration;) {
        if (!best || m->second.iteration > best->iteration) best = m->second;
        m = queue.erase(m);
    }
    if (best) queue.emplace(iteration, *best);
    return best;
}

void LossyTransport::reset() {
    std::lock_guard<std::mutex> lock(mutex_);
    in_flight_.clear();
}

int LossyTransport::dropped() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return dropped_;
}

// ---------------------------------------------------------------------------
// Reports

const char* to_string(ConsensusStatus status) {
    switch (status) {
        case ConsensusStatus::Converged: return "Converged";
        case ConsensusStatus::MaxIter: return "MaxIter";
        case ConsensusStatus::LocalInfeasible: return "LocalInfeasible";
    }
    return "?";
}

double ConsensusReport::final_residual() const {
    if (residuals.empty() || residuals.back().empty()) return 0.0;
    return *std::max_element(residuals.back().begin(), residuals.back().end());
}

bool ConsensusReport::operator==(const ConsensusReport& o) const {
    return status == o.status && iterations == o.iterations && failed_agent == o.failed_agent &&
           residuals == o.residuals && objectives == o.objectives && local_solves == o.local_solves;
}

Vector extract_input(const Vector& z, const DecisionLayout& layout) {
    return z.segment(layout.input(0, 0), layout.input_dim);
}

// ---------------------------------------------------------------------------
// Consensus

namespace {

struct AgentEdge {
    int neighbor = 0;
    IndexList mine;
    Vector lambda;
};

struct Agent {
    int index = 0;
    const LocalFhocp* problem = nullptr;
    QpSolver solver;
    std::vector<AgentEdge> edges;
    Vector z;
    Vector z_prev;
    QpStatus status = QpStatus::Optimal;

    explicit Agent(const QpSettings& s) : solver(s) {}

    void send(Transport& transport, int iteration) const {
        for (const auto& e : edges) transport.send(Message{index, e.neighbor, iteration, select(z, e.mine)});
    }

    void update(Transport& transport, int iteration, double rho) {
        Vector q = problem->qp.q;
        for (auto& e : edges) {
            const Vector own = select(z, e.mine);
            const auto msg = transport.receive(index, e.neighbor, iteration);
            const Vector other = msg ? msg->payload : own;
            e.lambda += rho * (own - other);
            const Vector lin = e.lambda - rho * (own + other);
            for (std::size_t k = 0; k < e.mine.size(); ++k) q(e.mine[k]) += lin(static_cast<Eigen::Index>(k));
        }
        solver.update_linear_cost(q);
        const QpSolution sol = solver.solve();
        status = sol.status;
        z_prev = z;
        if (sol.status != QpStatus::Infeasible) z = sol.z;
    }
};

}  // namespace

ConsensusResult run_consensus(const std::vector<LocalFhocp>& problems, const std::vector<EdgeOverlap>& overlaps,
                              const ConsensusSettings& settings, Transport& transport,
                              const ConsensusStart* warm_start) {
    const int M = static_cast<int>(problems.size());
    if (warm_start && static_cast<int>(warm_start->solutions.size()) != M) {
        throw Error(ErrorKind::DimensionMismatch, "one warm start per agent expected");
    }
    if (warm_start && !warm_start->duals.empty() && warm_start->duals.size() != overlaps.size()) {
        throw Error(ErrorKind::DimensionMismatch, "one dual pair per edge expected");
    }
    transport.reset();
    ConsensusResult result;
    ConsensusReport& report = result.report;

    std::vector<Agent> agents;
    agents.reserve(static_cast<std::size_t>(M));
    for (int i = 0; i < M; ++i) {
        agents.emplace_back(settings.qp);
        agents.back().index = i;
        agents.back().problem = &problems[static_cast<std::size_t>(i)];
    }
    // slot[e] = positions of edge e in the edge lists of agents e.i and e.j
    std::vector<std::pair<std::size_t, std::size_t>> slot;
    for (std::size_t k = 0; k < overlaps.size(); ++k) {
        const auto& e = overlaps[k];
        if (e.in_i.size() != e.in_j.size()) throw Error(ErrorKind::DimensionMismatch, "unbalanced edge overlap");
        const auto len = static_cast<Eigen::Index>(e.in_i.size());
        Vector li = Vector::Zero(len), lj = Vector::Zero(len);
        if (warm_start && !warm_start->duals.empty()) {
            li = warm_start->duals[k].first;
            lj = warm_start->duals[k].second;
            if (li.size() != len || lj.size() != len) throw Error(ErrorKind::DimensionMismatch, "dual size mismatch");
        }
        auto& ei = agents[static_cast<std::size_t>(e.i)].edges;
        auto& ej = agents[static_cast<std::size_t>(e.j)].edges;
        slot.emplace_back(ei.size(), ej.size());
        ei.push_back({e.j, e.in_i, std::move(li)});
        ej.push_back({e.i, e.in_j, std::move(lj)});
    }
    auto collect = [&]() {
        for (const auto& a : agents) result.solutions.push_back(a.z);
        for (std::size_t k = 0; k < overlaps.size(); ++k) {
            result.duals.emplace_back(agents[static_cast<std::size_t>(overlaps[k].i)].edges[slot[k].first].lambda,
                                      agents[static_cast<std::size_t>(overlaps[k].j)].edges[slot[k].second].lambda);
        }
    };

    auto objective_sum = [&]() {
        double s = 0.0;
        for (const auto& a : agents) s += a.problem->objective(a.z);
        return s;
    };
    auto edge_residuals = [&]() {
        std::vector<double> r;
        r.reserve(overlaps.size());
        for (const auto& e : overlaps) {
            const Vector& zi = agents[static_cast<std::size_t>(e.i)].z;
            const Vector& zj = agents[static_cast<std::size_t>(e.j)].z;
            double worst = 0.0;
            for (std::size_t k = 0; k < e.in_i.size(); ++k) worst = std::max(worst, std::abs(zi(e.in_i[k]) - zj(e.in_j[k])));
            r.push_back(worst);
        }
        return r;
    };
    auto fail = [&](int agent) {
        report.status = ConsensusStatus::LocalInfeasible;
        report.failed_agent = agent;
    };

    // Start point.
    for (auto& a : agents) {
        if (warm_start) {
            a.z = warm_start->solutions[static_cast<std::size_t>(a.index)];
            if (a.z.size() != a.problem->qp.dim()) throw Error(ErrorKind::DimensionMismatch, "warm start size mismatch");
        } else {
            const QpSolution sol = solve(a.problem->qp, std::nullopt, settings.qp);
            ++report.local_solves;
            if (sol.status == QpStatus::Infeasible) {
                fail(a.index);
                a.z = sol.z;
            } else {
                a.z = sol.z;
            }
        }
    }
    report.residuals.push_back(edge_residuals());
    report.objectives.push_back(objective_sum());
    if (report.status == ConsensusStatus::LocalInfeasible || overlaps.empty()) {
        if (report.status != ConsensusStatus::LocalInfeasible) report.status = ConsensusStatus::Converged;
        collect();
        return result;
    }

    // Augmented Hessians are fixed for the whole run: P + 2 rho sum E'E.
    for (auto& a : agents) {
        QuadraticProgram qp = a.problem->qp;
        for (const auto& e : a.edges)
            for (int idx : e.mine) qp.P(idx, idx) += 2.0 * settings.rho;
        a.solver.setup(qp);
        a.solver.warm_start(a.z);
    }

    // Round bookkeeping shared by both schedules; runs on a single thread.
    bool stop = false;
    int round = 0;
    auto finish_round = [&]() {
        ++round;
        report.local_solves += M;
        report.iterations = round;
        report.residuals.push_back(edge_residuals());
        report.objectives.push_back(objective_sum());
        for (const auto& a : agents) {
            if (a.status == QpStatus::Infeasible) {
                fail(a.index);
                stop = true;
                return;
            }
        }
        const auto& res = report.residuals.back();
        double worst = res.empty() ? 0.0 : *std::max_element(res.begin(), res.end());
        double drift = 0.0;
        for (const auto& a : agents) {
            const Segment& alpha = a.problem->layout.alpha;
            for (const auto& e : a.edges)
                for (int idx : e.mine)
                    if (idx < alpha.begin || idx >= alpha.end())
                        drift = std::max(drift, settings.rho * std::abs(a.z(idx) - a.z_prev(idx)));
        }
        if (worst <= settings.eps_consensus && drift <= settings.eps_consensus) {
            report.status = ConsensusStatus::Converged;
            stop = true;
        } else if (round >= settings.max_iter) {
            report.status = ConsensusStatus::MaxIter;
            stop = true;
        }
    };

    if (settings.schedule == Schedule::Sequential || M == 1) {
        while (!stop) {
            for (const auto& a : agents) a.send(transport, round);
            for (auto& a : agents) a.update(transport, round, settings.rho);
            finish_round();
        }
    } else {
        std::exception_ptr error;
        std::mutex error_mutex;
        std::atomic<bool> aborted{false};
        int phase = 0;
        auto completion = [&]() noexcept {
            if (++phase % 2 == 0) {
                try {
                    if (aborted.load()) stop = true;
                    else finish_round();
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    stop = true;
                }
            }
        };
        std::barrier sync(M, completion);
        auto worker = [&](int i) {
            Agent& a = agents[static_cast<std::size_t>(i)];
            while (true) {
                const int k = round;
                try {
                    a.send(transport, k);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    aborted = true;
                }
                sync.arrive_and_wait();
                try {
                    if (!aborted.load()) a.update(transport, k, settings.rho);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    aborted = true;
                }
                sync.arrive_and_wait();
                if (stop) break;
            }
        };
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(M));
        for (int i = 0; i < M; ++i) threads.emplace_back(worker, i);
        for (auto& t : threads) t.join();
        if (error) std::rethrow_exception(error);
    }

    collect();
    return result;
}

}  // namespace dlmpc
