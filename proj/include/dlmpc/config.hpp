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
#ifndef DLMPC_CONFIG_HPP
#define DLMPC_CONFIG_HPP

#include <optional>
#include <string>

#include "dlmpc/controller.hpp"
#include "dlmpc/explore.hpp"

namespace dlmpc {

inline constexpr const char* kConfigSchema = "dlmpc/1";

/// Everything one experiment needs, read from a JSON file with schema "dlmpc/1".
///
/// The "system" entry is either an inline object or a path to a JSON file
/// holding that object, resolved relative to the config file.
struct ExperimentConfig {
    std::string name = "run";
    PartitionedSystem system;
    RunConfig run;
    std::optional<ExploreConfig> explore;
    int oracle_horizon = 200;
    std::string output_directory = "out";
    bool admm_diagnostics = false;
};

/// Throws Error(Config) on unreadable files, schema mismatches or missing fields;
/// model errors from system validation propagate unchanged.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text, const std::string& base_directory = ".");

}  // namespace dlmpc

#endif  // DLMPC_CONFIG_HPP
