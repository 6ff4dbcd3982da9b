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
#include "dlmpc/config.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dlmpc/error.hpp"

namespace dlmpc {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorKind::Config, what); }

const json& field(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) fail(where + ": missing field '" + key + "'");
    return obj.at(key);
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) fail(where + ": expected a number");
    return j.get<double>();
}

int integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) fail(where + ": expected an integer");
    return j.get<int>();
}

Vector vector_from(const json& j, const std::string& where) {
    if (!j.is_array()) fail(where + ": expected an array of numbers");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t k = 0; k < j.size(); ++k) v(static_cast<Eigen::Index>(k)) = number(j[k], where);
    return v;
}

/// Nested row arrays; an empty array is a 0 x cols matrix.
Matrix matrix_from(const json& j, const std::string& where, Eigen::Index cols_if_empty = 0) {
    if (!j.is_array()) fail(where + ": expected an array of rows");
    if (j.empty()) return Matrix::Zero(0, cols_if_empty);
    const auto cols = j[0].is_array() ? j[0].size() : 0;
    Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (!j[r].is_array() || j[r].size() != cols) fail(where + ": rows must have equal length");
        for (std::size_t c = 0; c < cols; ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = number(j[r][c], where);
        }
    }
    return m;
}

std::vector<Matrix> matrices_from(const json& j, const std::string& where) {
    if (!j.is_array()) fail(where + ": expected one matrix per subsystem");
    std::vector<Matrix> out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(matrix_from(j[k], where + "[" + std::to_string(k) + "]"));
    return out;
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return json::parse(buf.str());
    } catch (const json::parse_error& e) {
        fail(path.string() + ": " + e.what());
    }
}

PartitionedSystem system_from(const json& j) {
    GlobalSystem g;
    g.A = matrix_from(field(j, "A", "system"), "system.A");
    g.B = matrix_from(field(j, "B", "system"), "system.B");
    g.G = matrix_from(field(j, "G", "system"), "system.G", g.A.rows());
    g.g = vector_from(field(j, "g", "system"), "system.g");
    g.L = matrix_from(field(j, "L", "system"), "system.L", g.B.cols());
    g.l = vector_from(field(j, "l", "system"), "system.l");
    g.x_target = vector_from(field(j, "x_target", "system"), "system.x_target");
    g.x_start = vector_from(field(j, "x_start", "system"), "system.x_start");

    std::vector<Block> blocks;
    const json& jb = field(j, "blocks", "system");
    if (!jb.is_array()) fail("system.blocks: expected an array");
    for (const auto& b : jb) {
        const Vector s = vector_from(field(b, "states", "system.blocks"), "system.blocks.states");
        const Vector u = vector_from(field(b, "inputs", "system.blocks"), "system.blocks.inputs");
        if (s.size() != 2 || u.size() != 2) fail("system.blocks: states and inputs are [begin, count] pairs");
        blocks.push_back({static_cast<int>(s(0)), static_cast<int>(s(1)), static_cast<int>(u(0)), static_cast<int>(u(1))});
    }
    std::vector<std::vector<int>> neighbors;
    const json& jn = field(j, "neighbors", "system");
    if (!jn.is_array()) fail("system.neighbors: expected an array");
    for (const auto& row : jn) {
        std::vector<int> nb;
        for (const auto& v : row) nb.push_back(integer(v, "system.neighbors"));
        neighbors.push_back(std::move(nb));
    }
    Partition partition(std::move(blocks), std::move(neighbors));

    const json& jc = field(j, "cost", "system");
    StageCost cost;
    if (jc.contains("Q_neighborhood")) {
        cost.Q = matrices_from(jc.at("Q_neighborhood"), "system.cost.Q_neighborhood");
        cost.R = matrices_from(field(jc, "R", "system.cost"), "system.cost.R");
    } else {
        cost = StageCost::separable(partition, matrices_from(field(jc, "Q", "system.cost"), "system.cost.Q"),
                                    matrices_from(field(jc, "R", "system.cost"), "system.cost.R"));
    }
    return PartitionedSystem::create(std::move(g), std::move(partition), std::move(cost));
}

void run_from(const json& j, RunConfig& run) {
    auto num = [&](const char* key, double& out) {
        if (j.contains(key)) out = number(j.at(key), std::string("run.") + key);
    };
    auto whole = [&](const char* key, int& out) {
        if (j.contains(key)) out = integer(j.at(key), std::string("run.") + key);
    };
    whole("horizon", run.horizon);
    whole("iterations", run.iterations);
    num("rho", run.consensus.rho);
    num("eps_consensus", run.consensus.eps_consensus);
    whole("max_admm_iterations", run.consensus.max_iter);
    num("convergence_epsilon", run.convergence_epsilon);
    whole("max_time_steps", run.max_time_steps);
    if (j.contains("seed")) run.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("shift_warm_start")) run.shift_warm_start = j.at("shift_warm_start").get<bool>();
    if (j.contains("schedule")) {
        const std::string s = j.at("schedule").get<std::string>();
        if (s == "sequential") run.consensus.schedule = Schedule::Sequential;
        else if (s == "concurrent") run.consensus.schedule = Schedule::Concurrent;
        else fail("run.schedule: expected 'sequential' or 'concurrent'");
    }
    if (j.contains("keep_last")) {
        const int k = integer(j.at("keep_last"), "run.keep_last");
        run.retention = k > 0 ? RetentionPolicy::keep_last(k) : RetentionPolicy{};
    }
    if (j.contains("bootstrap")) {
        const json& b = j.at("bootstrap");
        if (b.contains("horizon")) run.bootstrap.horizon = integer(b.at("horizon"), "run.bootstrap.horizon");
        if (b.contains("state_weight")) run.bootstrap.state_weight = number(b.at("state_weight"), "run.bootstrap.state_weight");
        if (b.contains("terminal_cost")) run.bootstrap.terminal_cost = b.at("terminal_cost").get<bool>();
        if (b.contains("max_time_steps")) run.bootstrap.max_time_steps = integer(b.at("max_time_steps"), "run.bootstrap.max_time_steps");
        if (b.contains("shift_warm_start")) run.bootstrap.shift_warm_start = b.at("shift_warm_start").get<bool>();
    }
}

ExploreConfig explore_from(const json& j, const PartitionedSystem& system) {
    ExploreConfig ex;
    const json& jt = field(j, "targets", "explore");
    if (!jt.is_array()) fail("explore.targets: expected an array of targets");
    for (const auto& target : jt) {
        std::vector<Vector> per;
        if (!target.is_array()) fail("explore.targets: each target lists one state per subsystem");
        for (const auto& x : target) per.push_back(vector_from(x, "explore.targets"));
        ex.targets.push_back(std::move(per));
    }
    if (j.contains("max_rounds")) ex.max_rounds = integer(j.at("max_rounds"), "explore.max_rounds");
    if (j.contains("epsilon")) ex.epsilon = number(j.at("epsilon"), "explore.epsilon");
    if (j.contains("variant")) {
        const std::string v = j.at("variant").get<std::string>();
        if (v == "quadratic") ex.variant = ExplorationObjective::Kind::Quadratic;
        else if (v == "linear") ex.variant = ExplorationObjective::Kind::Linear;
        else fail("explore.variant: expected 'quadratic' or 'linear'");
    }
    ex.validate(system);
    return ex;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text, const std::string& base_directory) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        fail(std::string("invalid JSON: ") + e.what());
    }
    try {
        const json& schema = field(root, "schema", "config");
        if (!schema.is_string() || schema.get<std::string>() != kConfigSchema) {
            fail(std::string("config: schema must be '") + kConfigSchema + "'");
        }
        ExperimentConfig cfg;
        if (root.contains("name")) cfg.name = root.at("name").get<std::string>();
        const json& js = field(root, "system", "config");
        cfg.system = js.is_string() ? system_from(read_json(fs::path(base_directory) / js.get<std::string>()))
                                    : system_from(js);
        if (root.contains("run")) run_from(root.at("run"), cfg.run);
        cfg.run.validate();
        if (root.contains("explore")) cfg.explore = explore_from(root.at("explore"), cfg.system);
        if (root.contains("oracle")) {
            const json& jo = root.at("oracle");
            if (jo.contains("horizon")) cfg.oracle_horizon = integer(jo.at("horizon"), "oracle.horizon");
        }
        if (root.contains("output")) {
            const json& jo = root.at("output");
            if (jo.contains("directory")) cfg.output_directory = jo.at("directory").get<std::string>();
            if (jo.contains("admm_diagnostics")) cfg.admm_diagnostics = jo.at("admm_diagnostics").get<bool>();
        }
        return cfg;
    } catch (const json::exception& e) {
        fail(std::string("config: ") + e.what());
    }
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const fs::path parent = fs::path(path).parent_path();
    return parse_config(buf.str(), parent.empty() ? "." : parent.string());
}

}  // namespace dlmpc
