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
#include "dlmpc/safeset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <unordered_map>

#include "dlmpc/error.hpp"

namespace dlmpc {

std::vector<double> cost_to_go(const std::vector<double>& stage_costs) {
    std::vector<double> out(stage_costs.size(), 0.0);
    double acc = 0.0;
    for (std::size_t t = stage_costs.size(); t-- > 0;) {
        acc += stage_costs[t];
        out[t] = acc;
    }
    return out;
}

SafeSetStore::SafeSetStore(std::vector<Vector> targets, SafeSetOptions options)
    : targets_(std::move(targets)), options_(options), stored_(targets_.size()) {
    data_.resize(targets_.size());
}

void SafeSetStore::seed_with_targets(int iteration_id) {
    for (int i = 0; i < subsystems(); ++i) {
        const Vector& x = targets_[static_cast<std::size_t>(i)];
        add_trajectory(i, iteration_id, {x}, {Vector()}, {0.0});
    }
}

void SafeSetStore::add_trajectory(int subsystem, int iteration_id, const std::vector<Vector>& states,
                                  const std::vector<Vector>& inputs, const std::vector<double>& stage_costs) {
    if (subsystem < 0 || subsystem >= subsystems()) {
        throw Error(ErrorKind::DimensionMismatch, "subsystem index out of range");
    }
    if (states.empty() || states.size() != inputs.size() || states.size() != stage_costs.size()) {
        throw Error(ErrorKind::InvalidTrajectory, "states, inputs and stage costs must have equal nonzero length");
    }
    const Vector& target = targets_[static_cast<std::size_t>(subsystem)];
    for (const auto& x : states) {
        if (x.size() != target.size()) throw Error(ErrorKind::DimensionMismatch, "stored state has wrong size");
    }
    for (double h : stage_costs) {
        if (!(h >= 0.0)) throw Error(ErrorKind::InvalidTrajectory, "stage costs must be nonnegative");
    }
    if ((states.back() - target).norm() > options_.convergence_epsilon) {
        throw Error(ErrorKind::NotConverged, "final state of subsystem " + std::to_string(subsystem) +
                                                 " is not within the convergence tolerance of its target");
    }
    if (stage_costs.back() > options_.tail_epsilon) {
        throw Error(ErrorKind::NotConverged, "stage cost at the final stored point exceeds the tail tolerance");
    }
    for (const auto& traj : stored_[static_cast<std::size_t>(subsystem)]) {
        if (traj.iteration_id == iteration_id) {
            throw Error(ErrorKind::RegistryMismatch, "iteration " + std::to_string(iteration_id) + " already stored");
        }
    }
    auto& slot = pending_[iteration_id];
    if (slot.count(subsystem) != 0) {
        throw Error(ErrorKind::RegistryMismatch, "duplicate trajectory for subsystem " + std::to_string(subsystem));
    }
    for (const auto& [other, traj] : slot) {
        if (traj.states.size() != states.size()) {
            throw Error(ErrorKind::RegistryMismatch,
                        "subsystems " + std::to_string(other) + " and " + std::to_string(subsystem) +
                            " disagree on the length of iteration " + std::to_string(iteration_id));
        }
    }
    slot[subsystem] = StoredTrajectory{iteration_id, states, inputs, cost_to_go(stage_costs)};
    if (static_cast<int>(slot.size()) == subsystems()) commit(iteration_id);
}

void SafeSetStore::commit(int iteration_id) {
    auto node = pending_.extract(iteration_id);
    for (auto& [i, traj] : node.mapped()) stored_[static_cast<std::size_t>(i)].push_back(std::move(traj));
    prune(options_.retention);
}

void SafeSetStore::prune(const RetentionPolicy& policy) {
    if (policy.kind == RetentionPolicy::Kind::KeepLast) {
        const std::size_t keep = static_cast<std::size_t>(std::max(policy.keep, 1));
        for (auto& list : stored_) {
            if (list.size() > keep) list.erase(list.begin(), list.end() - static_cast<std::ptrdiff_t>(keep));
        }
    }
    rebuild();
}

void SafeSetStore::rebuild() {
    registry_.clear();
    successor_.clear();
    const int M = subsystems();
    if (M == 0 || stored_[0].empty()) {
        for (auto& d : data_) d = SafeSetData{};
        return;
    }

    // Joint byte key of one sample across all subsystems.
    auto key_of = [&](std::size_t l, std::size_t t) {
        std::string key;
        for (int i = 0; i < M; ++i) {
            const auto& traj = stored_[static_cast<std::size_t>(i)][l];
            const Vector& x = traj.states[t];
            key.append(reinterpret_cast<const char*>(x.data()), sizeof(double) * static_cast<std::size_t>(x.size()));
            key.append(reinterpret_cast<const char*>(&traj.cost_to_go[t]), sizeof(double));
        }
        return key;
    };

    const std::size_t L = stored_[0].size();
    std::unordered_map<std::string, int> seen;
    std::vector<std::vector<int>> position(L);
    for (std::size_t l = 0; l < L; ++l) {
        const auto& ref = stored_[0][l];
        position[l].resize(ref.states.size());
        for (std::size_t t = 0; t < ref.states.size(); ++t) {
            auto [it, inserted] = seen.emplace(key_of(l, t), static_cast<int>(registry_.size()));
            if (inserted) registry_.push_back({ref.iteration_id, static_cast<int>(t)});
            position[l][t] = it->second;
        }
    }
    successor_.assign(registry_.size(), 0);
    std::vector<char> assigned(registry_.size(), 0);
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t len = position[l].size();
        for (std::size_t t = 0; t < len; ++t) {
            const int k = position[l][t];
            if (assigned[static_cast<std::size_t>(k)]) continue;
            successor_[static_cast<std::size_t>(k)] = position[l][std::min(t + 1, len - 1)];
            assigned[static_cast<std::size_t>(k)] = 1;
        }
    }

    const auto K = static_cast<Eigen::Index>(registry_.size());
    std::map<int, std::size_t> iteration_slot;
    for (std::size_t l = 0; l < L; ++l) iteration_slot[stored_[0][l].iteration_id] = l;
    for (int i = 0; i < M; ++i) {
        const auto& list = stored_[static_cast<std::size_t>(i)];
        SafeSetData d;
        d.D.resize(targets_[static_cast<std::size_t>(i)].size(), K);
        d.c.resize(K);
        for (Eigen::Index k = 0; k < K; ++k) {
            const ColumnId& id = registry_[static_cast<std::size_t>(k)];
            const auto& traj = list[iteration_slot.at(id.iteration)];
            d.D.col(k) = traj.states[static_cast<std::size_t>(id.time)];
            d.c(k) = traj.cost_to_go[static_cast<std::size_t>(id.time)];
        }
        data_[static_cast<std::size_t>(i)] = std::move(d);
    }
}

SafeSetData SafeSetStore::safe_set_matrix(int subsystem) const {
    if (subsystem < 0 || subsystem >= subsystems()) throw Error(ErrorKind::DimensionMismatch, "subsystem out of range");
    if (registry_.empty()) throw Error(ErrorKind::EmptySafeSet, "no committed trajectories");
    return data_[static_cast<std::size_t>(subsystem)];
}

SafeSetData SafeSetStore::global_matrix(const std::vector<IndexList>& state_indices, int state_dim) const {
    if (registry_.empty()) throw Error(ErrorKind::EmptySafeSet, "no committed trajectories");
    if (static_cast<int>(state_indices.size()) != subsystems()) {
        throw Error(ErrorKind::DimensionMismatch, "one index list per subsystem expected");
    }
    SafeSetData g;
    g.D = Matrix::Zero(state_dim, size());
    g.c = Vector::Zero(size());
    for (int i = 0; i < subsystems(); ++i) {
        const auto& d = data_[static_cast<std::size_t>(i)];
        const auto& idx = state_indices[static_cast<std::size_t>(i)];
        for (std::size_t r = 0; r < idx.size(); ++r) g.D.row(idx[r]) = d.D.row(static_cast<Eigen::Index>(r));
        g.c += d.c;
    }
    return g;
}

std::vector<int> SafeSetStore::iterations() const {
    std::vector<int> out;
    if (stored_.empty()) return out;
    for (const auto& t : stored_[0]) out.push_back(t.iteration_id);
    return out;
}

std::vector<double> SafeSetStore::iteration_cost(int iteration_id) const {
    std::vector<double> out;
    for (const auto& list : stored_) {
        auto it = std::find_if(list.begin(), list.end(), [&](const auto& t) { return t.iteration_id == iteration_id; });
        if (it == list.end()) throw Error(ErrorKind::RegistryMismatch, "iteration not stored");
        out.push_back(it->cost_to_go.front());
    }
    return out;
}

namespace {

nlohmann::json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from(const nlohmann::json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

void SafeSetStore::save(const std::string& path) const {
    nlohmann::json j;
    j["schema"] = "dlmpc.safeset/1";
    j["convergence_epsilon"] = options_.convergence_epsilon;
    j["tail_epsilon"] = options_.tail_epsilon;
    j["retention"] = options_.retention.kind == RetentionPolicy::Kind::KeepAll ? 0 : options_.retention.keep;
    for (const auto& x : targets_) j["targets"].push_back(to_json(x));
    nlohmann::json registry = nlohmann::json::array();
    for (const auto& id : registry_) registry.push_back({id.iteration, id.time});
    j["registry"] = registry;
    nlohmann::json subs = nlohmann::json::array();
    for (int i = 0; i < subsystems(); ++i) {
        nlohmann::json s;
        if (!registry_.empty()) {
            const auto& d = data_[static_cast<std::size_t>(i)];
            nlohmann::json cols = nlohmann::json::array();
            for (Eigen::Index k = 0; k < d.D.cols(); ++k) cols.push_back(to_json(d.D.col(k)));
            s["D_columns"] = cols;
            s["c"] = to_json(d.c);
        }
        nlohmann::json trajs = nlohmann::json::array();
        for (const auto& t : stored_[static_cast<std::size_t>(i)]) {
            nlohmann::json tj;
            tj["iteration"] = t.iteration_id;
            for (const auto& x : t.states) tj["states"].push_back(to_json(x));
            for (const auto& u : t.inputs) tj["inputs"].push_back(to_json(u));
            tj["cost_to_go"] = t.cost_to_go;
            trajs.push_back(tj);
        }
        s["trajectories"] = trajs;
        subs.push_back(s);
    }
    j["subsystems"] = subs;
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Config, "cannot write " + path);
    out << j.dump(1) << '\n';
}

SafeSetStore SafeSetStore::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot read " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, path + ": " + e.what());
    }
    if (j.value("schema", "") != "dlmpc.safeset/1") throw Error(ErrorKind::Config, path + ": unknown schema");
    SafeSetOptions opts;
    opts.convergence_epsilon = j.at("convergence_epsilon").get<double>();
    opts.tail_epsilon = j.at("tail_epsilon").get<double>();
    const int keep = j.at("retention").get<int>();
    opts.retention = keep > 0 ? RetentionPolicy::keep_last(keep) : RetentionPolicy::keep_all();
    std::vector<Vector> targets;
    for (const auto& t : j.at("targets")) targets.push_back(vector_from(t));
    SafeSetStore store(targets, opts);
    const auto& subs = j.at("subsystems");
    if (subs.size() != targets.size()) throw Error(ErrorKind::Config, path + ": subsystem count mismatch");
    for (std::size_t i = 0; i < subs.size(); ++i) {
        for (const auto& tj : subs[i].at("trajectories")) {
            StoredTrajectory t;
            t.iteration_id = tj.at("iteration").get<int>();
            for (const auto& x : tj.at("states")) t.states.push_back(vector_from(x));
            for (const auto& u : tj.at("inputs")) t.inputs.push_back(vector_from(u));
            t.cost_to_go = tj.at("cost_to_go").get<std::vector<double>>();
            if (t.states.size() != t.cost_to_go.size() || t.states.size() != t.inputs.size()) {
                throw Error(ErrorKind::Config, path + ": inconsistent trajectory lengths");
            }
            store.stored_[i].push_back(std::move(t));
        }
    }
    for (std::size_t i = 1; i < store.stored_.size(); ++i) {
        if (store.stored_[i].size() != store.stored_[0].size()) {
            throw Error(ErrorKind::RegistryMismatch, path + ": subsystems hold different iteration counts");
        }
        for (std::size_t l = 0; l < store.stored_[i].size(); ++l) {
            if (store.stored_[i][l].iteration_id != store.stored_[0][l].iteration_id ||
                store.stored_[i][l].states.size() != store.stored_[0][l].states.size()) {
                throw Error(ErrorKind::RegistryMismatch, path + ": subsystems disagree on stored iterations");
            }
        }
    }
    store.rebuild();
    return store;
}

}  // namespace dlmpc
