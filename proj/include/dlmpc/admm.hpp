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
#ifndef DLMPC_ADMM_HPP
#define DLMPC_ADMM_HPP

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <vector>

#include "dlmpc/fhocp.hpp"
#include "dlmpc/qp.hpp"

namespace dlmpc {

/// Selected entries E_ij z_i sent from one agent to a neighbor.
struct Message {
    int sender = 0;
    int receiver = 0;
    int iteration = 0;
    Vector payload;
};

/**
 * @brief Message passing between agents
 *
 * Agents send once per round and then ask for the freshest payload received
 * from each neighbor. Implementations must be safe for concurrent use.
 */
class Transport {
public:
    virtual ~Transport() = default;
    virtual void send(Message message) = 0;
    /// Latest payload from `sender` with iteration <= `iteration`, if any arrived.
    virtual std::optional<Message> receive(int receiver, int sender, int iteration) = 0;
    /// Forgets all messages (called at the start of every consensus run).
    virtual void reset() = 0;
};

/// Lossless, in-order delivery within the same round.
class SynchronousTransport : public Transport {
public:
    void send(Message message) override;
    std::optional<Message> receive(int receiver, int sender, int iteration) override;
    void reset() override;

private:
    std::mutex mutex_;
    std::map<std::pair<int, int>, Message> latest_;
};

/**
 * Drops each message with a fixed probability and delays the rest by up to
 * `max_delay` rounds. A receiver falls back to the newest payload it has; an
 * older payload never replaces a newer one. Decisions depend only on
 * (seed, sender, receiver, iteration), so runs are reproducible under any
 * thread interleaving.
 */
class LossyTransport : public Transport {
public:
    LossyTransport(double drop_probability, int max_delay, std::uint64_t seed);

    void send(Message message) override;
    std::optional<Message> receive(int receiver, int sender, int iteration) override;
    void reset() override;

    int dropped() const;

private:
    double drop_probability_;
    int max_delay_;
    std::uint64_t seed_;
    mutable std::mutex mutex_;
    // (receiver, sender) -> messages keyed by the round in which they become visible
    std::map<std::pair<int, int>, std::multimap<int, Message>> in_flight_;
    int dropped_ = 0;
};

enum class Schedule { Sequential, Concurrent };

struct ConsensusSettings {
    double rho = 1.0;
    double eps_consensus = 1e-5;
    int max_iter = 5000;
    Schedule schedule = Schedule::Sequential;
    QpSettings qp;
};

enum class ConsensusStatus { Converged, MaxIter, LocalInfeasible };

const char* to_string(ConsensusStatus status);

struct ConsensusReport {
    ConsensusStatus status = ConsensusStatus::MaxIter;
    int iterations = 0;
    /// Agent whose local QP failed when status is LocalInfeasible.
    int failed_agent = -1;
    /// residuals[k][e]: infinity norm of E_ij z_i - E_ji z_j for edge e after round k (k = 0 is the start point).
    std::vector<std::vector<double>> residuals;
    /// Sum of local objectives after round k.
    std::vector<double> objectives;
    int local_solves = 0;

    double final_residual() const;
    bool operator==(const ConsensusReport& other) const;
};

/// Edge duals, indexed like the overlap list: lambda[e] = {dual held by e.i, dual held by e.j}.
using EdgeDuals = std::vector<std::pair<Vector, Vector>>;

struct ConsensusResult {
    std::vector<Vector> solutions;
    EdgeDuals duals;
    ConsensusReport report;
};

/// Start point for a consensus run. Empty duals start at zero.
struct ConsensusStart {
    std::vector<Vector> solutions;
    EdgeDuals duals;
};

/**
 * Consensus ADMM over the given local problems.
 *
 * Each round every agent sends its overlap entries, updates one dual vector per
 * incident edge with rho times the disagreement, and solves its local QP
 * augmented by the duals and a proximal term toward the edge midpoints.
 * Starts from `warm_start` when given, else from each agent's isolated optimum
 * with zero duals. Stops after the first round in which every edge residual
 * is at most eps_consensus, or at max_iter.
 */
ConsensusResult run_consensus(const std::vector<LocalFhocp>& problems, const std::vector<EdgeOverlap>& overlaps,
                              const ConsensusSettings& settings, Transport& transport,
                              const ConsensusStart* warm_start = nullptr);

/// First input of the agent's planned input sequence.
Vector extract_input(const Vector& z, const DecisionLayout& layout);

}  // namespace dlmpc

#endif  // DLMPC_ADMM_HPP
