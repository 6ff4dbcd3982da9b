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
#include <pybind11/eigen.h>
#include <pybind11/iostream.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <iostream>

#include "dlmpc/cli.hpp"
#include "dlmpc/config.hpp"
#include "dlmpc/error.hpp"
#include "dlmpc/explore.hpp"

namespace py = pybind11;
using namespace dlmpc;

namespace {

py::dict record_to_dict(const IterationRecord& r) {
    const Eigen::Index T = static_cast<Eigen::Index>(r.states.size());
    Matrix states(T, T > 0 ? r.states[0].size() : 0), inputs(T, T > 0 ? r.inputs[0].size() : 0);
    for (Eigen::Index t = 0; t < T; ++t) {
        states.row(t) = r.states[static_cast<std::size_t>(t)].transpose();
        inputs.row(t) = r.inputs[static_cast<std::size_t>(t)].transpose();
    }
    py::dict d;
    d["iteration"] = r.iteration;
    d["cost"] = r.cost;
    d["subsystem_costs"] = r.subsystem_costs;
    d["states"] = states;
    d["inputs"] = inputs;
    d["converged"] = r.converged;
    d["flagged"] = r.flagged;
    return d;
}

py::list records_to_list(const std::vector<IterationRecord>& records) {
    py::list out;
    for (const auto& r : records) out.append(record_to_dict(r));
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Distributed learning MPC core";

    py::register_exception<Error>(m, "DlmpcError", PyExc_RuntimeError);

    py::enum_<QpStatus>(m, "QpStatus")
        .value("Optimal", QpStatus::Optimal)
        .value("Infeasible", QpStatus::Infeasible)
        .value("MaxIter", QpStatus::MaxIter);

    m.def(
        "solve_qp",
        [](Matrix P, Vector q, std::optional<Matrix> A_eq, std::optional<Vector> b_eq, std::optional<Matrix> A_in,
           std::optional<Vector> b_in) {
            QuadraticProgram qp;
            const Eigen::Index d = q.size();
            qp.P = std::move(P);
            qp.q = std::move(q);
            qp.A_eq = A_eq ? *A_eq : Matrix::Zero(0, d);
            qp.b_eq = b_eq ? *b_eq : Vector::Zero(0);
            qp.A_in = A_in ? *A_in : Matrix::Zero(0, d);
            qp.b_in = b_in ? *b_in : Vector::Zero(0);
            const QpSolution s = solve(qp);
            return py::make_tuple(s.status, s.z, s.objective);
        },
        py::arg("P"), py::arg("q"), py::arg("A_eq") = py::none(), py::arg("b_eq") = py::none(),
        py::arg("A_in") = py::none(), py::arg("b_in") = py::none(),
        "Solves min 0.5 z'Pz + q'z s.t. A_eq z = b_eq, A_in z <= b_in. Returns (status, z, objective).");

    m.def("hull_distance", &hull_distance, py::arg("D"), py::arg("point"),
          "Euclidean distance from a point to the convex hull of the columns of D.");

    py::class_<ExperimentConfig>(m, "Experiment")
        .def(py::init([](const std::string& path) { return load_config(path); }), py::arg("path"))
        .def_static("from_json", [](const std::string& text) { return parse_config(text); }, py::arg("text"))
        .def_readwrite("name", &ExperimentConfig::name)
        .def_readwrite("oracle_horizon", &ExperimentConfig::oracle_horizon)
        .def_property(
            "horizon", [](const ExperimentConfig& c) { return c.run.horizon; },
            [](ExperimentConfig& c, int n) { c.run.horizon = n; })
        .def_property(
            "iterations", [](const ExperimentConfig& c) { return c.run.iterations; },
            [](ExperimentConfig& c, int n) { c.run.iterations = n; })
        .def_property_readonly("subsystems", [](const ExperimentConfig& c) { return c.system.size(); })
        .def(
            "bootstrap",
            [](const ExperimentConfig& c) {
                py::gil_scoped_release release;
                IterationRecord r = bootstrap_feasible(c.system, c.run);
                py::gil_scoped_acquire acquire;
                return record_to_dict(r);
            },
            "First feasible closed loop from the start state.")
        .def(
            "run_task",
            [](const ExperimentConfig& c) {
                std::vector<IterationRecord> records;
                {
                    py::gil_scoped_release release;
                    c.run.validate();
                    records = run_task(c.system, {bootstrap_feasible(c.system, c.run)}, c.run).records;
                }
                return records_to_list(records);
            },
            "Bootstrap followed by the configured learning iterations.")
        .def(
            "explore",
            [](const ExperimentConfig& c) {
                if (!c.explore) throw Error(ErrorKind::Config, "config has no 'explore' section");
                ExploreResult res;
                {
                    py::gil_scoped_release release;
                    res = enlarge_domain(c.system, *c.explore, c.run);
                }
                py::dict d;
                d["complete"] = res.complete;
                d["rounds"] = res.rounds.size();
                d["records"] = records_to_list(res.records());
                return d;
            })
        .def("oracle", [](const ExperimentConfig& c) {
            const OracleResult r = centralized_oracle(c.system, c.oracle_horizon);
            return py::make_tuple(r.status, r.cost);
        });

    m.def(
        "main",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "dlmpc");
            std::vector<const char*> argv;
            for (const auto& a : args) argv.push_back(a.c_str());
            py::scoped_ostream_redirect out(std::cout, py::module_::import("sys").attr("stdout"));
            return run_cli(static_cast<int>(argv.size()), argv.data(), std::cout, std::cerr);
        },
        py::arg("args"), "Runs the command-line tool with the given arguments and returns its exit code.");
}
