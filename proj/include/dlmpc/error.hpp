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
#ifndef DLMPC_ERROR_HPP
#define DLMPC_ERROR_HPP

#include <stdexcept>
#include <string>

namespace dlmpc {

enum class ErrorKind {
    DimensionMismatch,
    InvalidSystem,
    ConstraintRowUnassignable,
    NotConverged,
    RegistryMismatch,
    EmptySafeSet,
    DisconnectedGraph,
    RecursiveFeasibilityViolated,
    IterationDidNotConverge,
    BootstrapFailed,
    InvalidTrajectory,
    RoundBudgetExhausted,
    Config,
};

const char* to_string(ErrorKind kind);

/// Base exception for every recoverable failure raised by the library.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Raised when a local QP inside a closed-loop step is infeasible.
class RecursiveFeasibilityError : public Error {
public:
    RecursiveFeasibilityError(int subsystem, const std::string& message)
        : Error(ErrorKind::RecursiveFeasibilityViolated,
                "subsystem " + std::to_string(subsystem) + ": " + message),
          subsystem_(subsystem) {}

    int subsystem() const noexcept { return subsystem_; }

private:
    int subsystem_;
};

}  // namespace dlmpc

#endif  // DLMPC_ERROR_HPP
