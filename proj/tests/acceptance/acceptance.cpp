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
// Acceptance run: one PASS/FAIL line per criterion. Tolerances are fixed here.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dlmpc/cli.hpp"
#include "dlmpc/config.hpp"
#include "dlmpc/error.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace dlmpc;
namespace fs = std::filesystem;

namespace tol {
constexpr double kIterationZero = 0.02;
constexpr double kIteration = 0.01;
constexpr double kMonotone = 1e-4;
constexpr double kOptimalityGap = 0.005;
constexpr double kAdmmObjective = 1e-4;
constexpr double kAdmmInput = 1e-3;
constexpr double kQpObjective = 1e-6;
constexpr double kQpSolution = 1e-6;
constexpr int kExploreRounds = 6;
constexpr double kExploreConstraint = 1e-7;
constexpr double kExploreDistance = 1e-6;
constexpr double kLyapunov = 1e-5;
}  // namespace tol

namespace {

struct Outcome {
    int id = 0;
    bool pass = false;
    std::string detail;
};

std::vector<Outcome> outcomes;

void report(int id, bool pass, const std::string& detail) {
    outcomes.push_back({id, pass, detail});
    std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Relative paths of every regular file under `root`.
std::set<std::string> files_under(const fs::path& root) {
    std::set<std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out.insert(fs::relative(e.path(), root).string());
    return out;
}

double worst_violation(const PartitionedSystem& sys, const IterationRecord& r) {
    double worst = 0.0;
    for (std::size_t t = 0; t < r.states.size(); ++t) {
        worst = std::max(worst, (sys.global.G * r.states[t] - sys.global.g).maxCoeff());
        worst = std::max(worst, (sys.global.L * r.inputs[t] - sys.global.l).maxCoeff());
    }
    return worst;
}

/// Criteria 1 and 4 from the bundled task run.
void table_and_optimum(const ReproReport& rep) {
    const auto& ref = reference_iteration_costs();
    double worst = 0.0;
    bool ok = rep.task.size() == ref.size();
    std::string seq;
    for (std::size_t q = 0; q < rep.task.size() && q < ref.size(); ++q) {
        const double rel = std::abs(rep.task[q].cost - ref[q]) / ref[q];
        ok = ok && rel <= (q == 0 ? tol::kIterationZero : tol::kIteration);
        worst = std::max(worst, q == 0 ? 0.0 : rel);
        seq += fmt(q == 0 ? "%.2f" : " %.2f", rep.task[q].cost);
    }
    report(1, ok, "iteration costs [" + seq + "]" + fmt("; iteration 0 off by %.3f%%, worst other %.3f%%",
                                                         100.0 * std::abs(rep.task[0].cost - ref[0]) / ref[0],
                                                         100.0 * worst));

    const double gap = std::abs(rep.task.back().cost - rep.oracle.cost) / rep.oracle.cost;
    report(4, rep.oracle.status == QpStatus::Optimal && gap <= tol::kOptimalityGap,
           fmt("last iteration %.4f vs centralized horizon-200 optimum %.4f (gap %.4f%%, bound 0.5%%)",
               rep.task.back().cost, rep.oracle.cost, 100.0 * gap));
}

struct MonotoneStats {
    int runs = 0;
    int flagged_runs = 0;
    int violations = 0;
    int feasibility_events = 0;
    double worst_increase = -INFINITY;
};

void check_sequence(const std::vector<IterationRecord>& recs, MonotoneStats& s) {
    bool flagged = false;
    for (const auto& r : recs) flagged = flagged || r.flagged;
    ++s.runs;
    if (flagged) {
        ++s.flagged_runs;
        return;
    }
    for (std::size_t q = 1; q < recs.size(); ++q) {
        const double inc = recs[q].cost - recs[q - 1].cost;
        s.worst_increase = std::max(s.worst_increase, inc);
        if (inc > tol::kMonotone) ++s.violations;
    }
}

/// Criteria 2 and 3: the bundled run plus random chains.
void monotone_and_feasible(const ReproReport& rep) {
    MonotoneStats s;
    check_sequence(rep.task, s);
    const int bundled_flagged = s.flagged_runs;

    std::mt19937_64 rng(2026);
    std::uniform_int_distribution<int> subsystems(2, 4);
    for (int trial = 0; trial < 20; ++trial) {
        const auto sys = fixture::random_chain(rng, subsystems(rng));
        RunConfig cfg;
        cfg.iterations = 6;
        cfg.seed = static_cast<std::uint64_t>(trial);
        try {
            const IterationRecord boot = bootstrap_feasible(sys, cfg);
            check_sequence(run_task(sys, {boot}, cfg).records, s);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::RecursiveFeasibilityViolated) ++s.feasibility_events;
            else ++s.violations;
            std::printf("  random instance %d: %s\n", trial, e.what());
        }
    }
    report(2, s.violations == 0 && bundled_flagged == 0,
           fmt("%.0f runs, worst J(q+1) - J(q) = %.3e (bound 1e-4)", s.runs, s.worst_increase) +
               fmt("; flagged runs excluded %.0f, flagged on the bundled run %.0f", s.flagged_runs, bundled_flagged));
    report(3, s.feasibility_events == 0, fmt("%.0f recursive-feasibility events over %.0f runs", s.feasibility_events, s.runs));
}

/// Criterion 5: consensus against the stacked QP.
void consensus_exactness() {
    std::mt19937_64 rng(55);
    std::uniform_int_distribution<int> subsystems(2, 4);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    int instances = 0, failures = 0, draws = 0;
    double worst_obj = 0.0, worst_input = 0.0;
    int largest = 0;
    while (instances < 50 && draws < 1000) {
        ++draws;
        const auto sys = fixture::random_chain(rng, subsystems(rng));
        SafeSetStore store = make_store(sys, RunConfig{});
        store.seed_with_targets(0);
        Controller ctl(sys, RunConfig{});
        Vector x(sys.global.A.rows());
        for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = 0.4 * unif(rng);

        std::vector<LocalFhocp> locals;
        for (int N = 6; N >= 2; --N) {
            FhocpOptions opts;
            opts.horizon = N;
            locals = ctl.local_problems(x, &store, opts);
            int dim = 0;
            for (const auto& p : locals) dim += p.qp.dim();
            if (dim <= 60) break;
        }
        int dim = 0;
        for (const auto& p : locals) dim += p.qp.dim();
        if (dim > 60) continue;
        const auto edges = edge_overlaps(locals, sys.partition);
        const StackedProblem stacked = stack_consensus(locals, edges);
        QpSettings tight;
        tight.eps_abs = 1e-10;
        tight.eps_rel = 1e-12;
        const QpSolution ref = solve(stacked.qp, std::nullopt, tight);
        if (ref.status != QpStatus::Optimal) continue;  // start state outside the feasible domain

        ConsensusSettings cs;
        cs.eps_consensus = 1e-7;
        cs.max_iter = 50000;
        SynchronousTransport transport;
        const ConsensusResult res = run_consensus(locals, edges, cs, transport);
        ++instances;
        largest = std::max(largest, dim);
        if (res.report.status != ConsensusStatus::Converged) {
            ++failures;
            continue;
        }
        const double opt = ref.objective + stacked.offset;
        const double rel = std::abs(res.report.objectives.back() - opt) / std::max(1.0, std::abs(opt));
        double du = 0.0;
        for (std::size_t i = 0; i < locals.size(); ++i) {
            const Vector mine = extract_input(res.solutions[i], locals[i].layout);
            const Vector theirs = extract_input(ref.z.segment(stacked.blocks[i].begin, stacked.blocks[i].size),
                                                locals[i].layout);
            du = std::max(du, (mine - theirs).lpNorm<Eigen::Infinity>());
        }
        worst_obj = std::max(worst_obj, rel);
        worst_input = std::max(worst_input, du);
        if (rel > tol::kAdmmObjective || du > tol::kAdmmInput) ++failures;
    }
    report(5, instances == 50 && failures == 0,
           fmt("%.0f instances (largest dimension %.0f), worst relative objective error %.2e", instances, largest,
               worst_obj) +
               fmt(", worst first-input gap %.2e, %.0f outside tolerance", worst_input, failures));
}

/// Criterion 6: QP solver against brute-force enumeration.
void qp_against_enumeration() {
    std::mt19937_64 rng(66);
    std::uniform_int_distribution<int> dims(1, 8);
    int failures = 0;
    double worst_obj = 0.0, worst_z = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const int d = dims(rng);
        const int m_eq = std::uniform_int_distribution<int>(0, std::max(0, d - 2))(rng);
        const int m_in = std::uniform_int_distribution<int>(0, 10)(rng);
        const QuadraticProgram qp = oracle::random_qp(rng, d, m_eq, m_in);
        const auto ref = oracle::brute_force_qp(qp);
        const QpSolution sol = solve(qp);
        if (!ref || sol.status != QpStatus::Optimal) {
            ++failures;
            continue;
        }
        const double eo = std::abs(sol.objective - ref->objective) / std::max(1.0, std::abs(ref->objective));
        const double ez = (sol.z - ref->z).lpNorm<Eigen::Infinity>() / std::max(1.0, ref->z.lpNorm<Eigen::Infinity>());
        worst_obj = std::max(worst_obj, eo);
        worst_z = std::max(worst_z, ez);
        if (eo > tol::kQpObjective || ez > tol::kQpSolution) ++failures;
    }
    report(6, failures == 0,
           fmt("200 random QPs, worst objective error %.2e, worst solution error %.2e, %.0f failures", worst_obj, worst_z,
               failures));
}

/// Criterion 7 from the exploration part of the bundled run.
void exploration(const ExperimentConfig& cfg, const ReproReport& rep) {
    if (!rep.exploration) {
        report(7, false, "bundled config has no exploration section");
        return;
    }
    const ExploreResult& ex = *rep.exploration;
    double worst_violation_seen = 0.0, worst_increase = -INFINITY;
    for (std::size_t r = 0; r < ex.rounds.size(); ++r) {
        worst_violation_seen = std::max(worst_violation_seen, worst_violation(cfg.system, ex.rounds[r].record));
        if (r == 0) continue;
        const auto& prev = ex.rounds[r - 1].hull_distance;
        const auto& now = ex.rounds[r].hull_distance;
        for (std::size_t k = 0; k < now.size(); ++k)
            for (std::size_t i = 0; i < now[k].size(); ++i) worst_increase = std::max(worst_increase, now[k][i] - prev[k][i]);
    }
    const int rounds = static_cast<int>(ex.rounds.size());
    const bool ok = ex.complete && rounds <= tol::kExploreRounds && worst_violation_seen <= tol::kExploreConstraint &&
                    worst_increase <= tol::kExploreDistance;
    report(7, ok, std::string(ex.complete ? "targets reached" : "targets missed") + fmt(" after %.0f rounds (bound 6)", rounds) +
                      fmt(", worst constraint violation %.2e, worst distance increase %.2e", worst_violation_seen,
                          worst_increase));
}

/// Criterion 8: FHOCP cost decrease along every closed loop of the bundled task.
void lyapunov(const ReproReport& rep) {
    double worst = -INFINITY;
    int worst_q = -1, worst_t = -1, checked = 0, above = 0;
    for (std::size_t q = 1; q < rep.task.size(); ++q) {
        const IterationRecord& r = rep.task[q];
        for (std::size_t t = 0; t + 1 < r.steps.size(); ++t) {
            double h = 0.0;
            for (double c : r.stage_costs[t]) h += c;
            const double slack = r.steps[t + 1].fhocp_cost - r.steps[t].fhocp_cost + h;
            ++checked;
            if (slack > tol::kLyapunov) ++above;
            if (slack > worst) {
                worst = slack;
                worst_q = static_cast<int>(q);
                worst_t = static_cast<int>(t);
            }
        }
    }
    report(8, above == 0,
           fmt("worst J(t+1) - J(t) + h(t) = %.3e (bound 1e-5) at iteration %.0f step %.0f", worst, worst_q, worst_t) +
               fmt("; %.0f of %.0f steps above the bound", above, checked));
}

/// Criterion 9: repeated runs and both schedulers.
void determinism(const ExperimentConfig& cfg, const fs::path& first, const fs::path& second) {
    const auto a = files_under(first);
    const auto b = files_under(second);
    int differing = a == b ? 0 : 1;
    int csv = 0;
    for (const auto& f : a) {
        if (fs::path(f).extension() != ".csv" || !b.count(f)) continue;
        ++csv;
        if (slurp(first / f) != slurp(second / f)) {
            ++differing;
            std::printf("  %s differs between runs\n", f.c_str());
        }
    }

    RunConfig seq = cfg.run, conc = cfg.run;
    seq.consensus.schedule = Schedule::Sequential;
    conc.consensus.schedule = Schedule::Concurrent;
    const IterationRecord rs = bootstrap_feasible(cfg.system, seq);
    const IterationRecord rc = bootstrap_feasible(cfg.system, conc);
    int report_mismatch = rs.steps.size() == rc.steps.size() ? 0 : 1;
    for (std::size_t t = 0; t < std::min(rs.steps.size(), rc.steps.size()); ++t)
        if (!(rs.steps[t].report == rc.steps[t].report)) ++report_mismatch;
    report(9, csv > 0 && differing == 0 && report_mismatch == 0,
           fmt("%.0f CSV files compared across two runs, %.0f differ", csv, differing) +
               fmt("; %.0f bootstrap time steps compared across schedulers, %.0f reports differ", rs.steps.size(),
                   report_mismatch));
}

}  // namespace

int main(int argc, char** argv) {
    // Usage: dlmpc_acceptance [config] [--known-red 8,...]
    // Criteria listed as known red may fail without failing the run; they still print FAIL.
    std::string config_path = DLMPC_BUNDLED_CONFIG;
    std::set<int> known_red;
    for (int a = 1; a < argc; ++a) {
        const std::string arg = argv[a];
        if (arg == "--known-red" && a + 1 < argc) {
            std::stringstream list(argv[++a]);
            for (std::string id; std::getline(list, id, ',');) known_red.insert(std::stoi(id));
        } else {
            config_path = arg;
        }
    }
    const fs::path work = fs::temp_directory_path() / "dlmpc_acceptance";
    fs::remove_all(work);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const ExperimentConfig cfg = load_config(config_path);
        const ReproReport first = full_repro(cfg, (work / "a").string());
        std::printf("bundled run finished in %.1f s\n", seconds_since(t0));
        table_and_optimum(first);
        exploration(cfg, first);
        lyapunov(first);
        monotone_and_feasible(first);
        consensus_exactness();
        qp_against_enumeration();
        full_repro(cfg, (work / "b").string());
        determinism(cfg, work / "a", work / "b");
    } catch (const std::exception& e) {
        std::printf("acceptance run aborted: %s\n", e.what());
        return 2;
    }
    fs::remove_all(work);

    int failed = 0, unexpected = 0;
    for (const auto& o : outcomes) {
        if (o.pass && known_red.count(o.id)) {
            std::printf("criterion %d is listed as known red but passed; update the list\n", o.id);
            ++unexpected;
        }
        if (!o.pass) {
            ++failed;
            if (!known_red.count(o.id)) ++unexpected;
        }
    }
    std::printf("%d of %zu criteria passed in %.1f s", static_cast<int>(outcomes.size()) - failed, outcomes.size(),
                seconds_since(t0));
    if (!known_red.empty()) std::printf(" (%zu listed as known red)", known_red.size());
    std::printf("\n");
    return unexpected == 0 ? 0 : 1;
}
