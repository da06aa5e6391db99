#pragma once

#include "unidiff/analysis.hpp"
#include "unidiff/config.hpp"
#include "unidiff/io.hpp"
#include "unidiff/stepper.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace unidiff {

/// Process exit codes of the command-line verbs.
enum ExitCode : int {
    kExitPass = 0,
    kExitChecksFailed = 1,
    kExitConfigError = 2,
    kExitNumericalError = 3,
};

namespace detail {

namespace fs = std::filesystem;

inline std::string numbered(const char* prefix, std::size_t k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%06zu.csv", prefix, k);
    return buf;
}

inline nlohmann::json grid_json(const Grid& g) {
    nlohmann::json j;
    j["dim"] = g.dim();
    j["nodes"] = g.node_count();
    j["unknowns"] = g.free_count();
    return j;
}

/// Marks every entry informational after a failed hypothesis pre-check.
inline void downgrade(Report& r, const std::string& why) {
    r.status = "hypotheses unchecked";
    for (auto& e : r.entries) {
        e.gating = false;
    }
    r.notes.push_back(why);
}

inline Report certificate_report(const Trajectory& traj, double tol) {
    Report r;
    r.name = "step_certificates";
    std::vector<double> scaled;
    double worst = 0.0;
    for (const auto& c : traj.certificates) {
        scaled.push_back(c.worst() / c.scale);
        worst = std::max(worst, scaled.back());
    }
    r.add("max_scaled_residual", worst, tol).series = std::move(scaled);
    return r;
}

/// Every enabled analysis of a finished trajectory, in a fixed order.
inline std::vector<Report> analyse(const Trajectory& traj, const RunConfig& c, const PreparedRun& p) {
    std::vector<Report> out;
    const double tol = c.checks.tol;
    if (c.checks.certificates) {
        out.push_back(certificate_report(traj, tol));
    }
    if (c.checks.complementarity) {
        out.push_back(complementarity_report(traj, tol));
    }
    if (c.checks.dissipation) {
        out.push_back(dissipation_report(traj, tol));
    }
    if (c.checks.energy) {
        out.push_back(energy_report(traj, *p.f_inf, tol).second);
    }
    if (c.checks.laplacian_bound) {
        Report r = laplacian_bound_report(traj, *p.f_star, tol);
        if (!p.f_star_hypothesis && r.status == "ok") {
            downgrade(r, "f exceeds f_star at some sampled node and knot");
        }
        out.push_back(std::move(r));
    }
    if (c.checks.asymptotic) {
        const SteadyState s = solve_steady_state(traj.grid, traj.states.front(), *p.f_inf);
        Report r = asymptotic_report(traj, s, c.checks.asymptotic_tol);
        if (!p.f_inf_hypothesis && r.status == "ok") {
            downgrade(r, "f exceeds f_inf at some sampled node and knot");
        }
        out.push_back(std::move(r));
    }
    return out;
}

inline nlohmann::json report_document(const std::string& verb, const std::vector<Report>& reports,
                                      const std::vector<std::string>& warnings) {
    nlohmann::json j;
    j["format"] = "unidiff-report/1";
    j["verb"] = verb;
    bool passed = true;
    nlohmann::json list = nlohmann::json::array();
    for (const auto& r : reports) {
        passed = passed && r.passed();
        list.push_back(to_json(r));
    }
    j["passed"] = passed;
    j["warnings"] = warnings;
    j["checks"] = std::move(list);
    return j;
}

inline void summarise(std::ostream& log, const std::vector<Report>& reports) {
    for (const auto& r : reports) {
        log << (r.passed() ? "pass  " : "FAIL  ") << r.name;
        if (r.status != "ok") {
            log << " (" << r.status << ")";
        }
        log << '\n';
        for (const auto& e : r.entries) {
            log << "        " << e.name << " = " << e.value << (e.gating ? " <= " : " (info) ") << e.threshold
                << '\n';
        }
    }
}

inline void write_trajectory(const fs::path& dir, const Trajectory& traj, const RunConfig& c, bool complete) {
    fs::create_directories(dir / "states");
    fs::create_directories(dir / "forcing");
    const std::size_t last = traj.states.size() - 1;
    nlohmann::json states = nlohmann::json::array();
    nlohmann::json means = nlohmann::json::array();
    for (std::size_t k = 0; k <= last; ++k) {
        if (k % c.stride != 0 && k != last) {
            continue;
        }
        const std::string file = "states/" + numbered("u", k);
        write_field_csv(dir / file, traj.grid, traj.states[k]);
        states.push_back({{"k", k}, {"t", traj.partition.knot(k)}, {"file", file}});
        if (k > 0) {
            const std::string ffile = "forcing/" + numbered("f", k);
            write_field_csv(dir / ffile, traj.grid, traj.forcing_means[k - 1]);
            means.push_back({{"k", k}, {"file", ffile}});
        }
    }
    nlohmann::json m;
    m["format"] = "unidiff-trajectory/1";
    m["config"] = c.source;
    m["grid"] = grid_json(traj.grid);
    m["knots"] = traj.partition.knots();
    m["stride"] = c.stride;
    m["complete"] = complete;
    m["states"] = std::move(states);
    m["forcing_means"] = std::move(means);
    write_json(dir / "manifest.json", m);
}

inline fs::path output_dir(const RunConfig& c, const std::optional<fs::path>& out) {
    return out ? *out : c.output_dir;
}

} // namespace detail

/**
 * Runs a configuration, writes snapshots, manifest, and report.json under
 * the output directory, and returns the exit code: 0 iff every enabled check
 * passes. A failed step writes the partial trajectory and returns 3.
 */
inline int execute(const RunConfig& c, std::ostream& log, const std::optional<std::filesystem::path>& out = {}) {
    const auto dir = detail::output_dir(c, out);
    std::filesystem::create_directories(dir);
    PreparedRun p = prepare(c);
    for (const auto& w : p.warnings) {
        log << "warning: " << w << '\n';
    }

    RunSetup setup{p.grid, p.u0, p.forcing, p.partition, c.step};
    const auto start = std::chrono::steady_clock::now();
    Trajectory traj;
    try {
        traj = run(setup);
    } catch (const RunFailure& e) {
        detail::write_trajectory(dir, e.partial(), c, false);
        nlohmann::json j = detail::report_document("run", {}, p.warnings);
        j["passed"] = false;
        j["failure"] = {{"step", e.failed_step()}, {"message", e.what()}};
        write_json(dir / "report.json", j);
        log << "error: " << e.what() << '\n';
        return kExitNumericalError;
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    detail::write_trajectory(dir, traj, c, true);
    const std::vector<Report> reports = detail::analyse(traj, c, p);
    nlohmann::json j = detail::report_document("run", reports, p.warnings);
    j["timing"] = {{"run_seconds", seconds}};
    write_json(dir / "report.json", j);
    detail::summarise(log, reports);
    log << "wrote " << dir.string() << '\n';
    return j["passed"].get<bool>() ? kExitPass : kExitChecksFailed;
}

/**
 * Re-checks a stored trajectory without solving: certificates are recomputed
 * from the snapshots and forcing means, then the configured analyses run.
 */
inline int verify(const std::filesystem::path& dir, std::ostream& log) {
    const nlohmann::json m = read_json(dir / "manifest.json");
    if (m.value("format", "") != "unidiff-trajectory/1") {
        throw ConfigError((dir / "manifest.json").string() + ": not a trajectory manifest");
    }
    const RunConfig c = parse_config(m.at("config"));
    if (c.stride != 1) {
        throw ConfigError("verify needs every step on disk; rerun with output.stride = 1");
    }
    if (!m.at("complete").get<bool>()) {
        throw ConfigError("trajectory is incomplete");
    }
    PreparedRun p = prepare(c);
    Trajectory traj;
    traj.grid = p.grid;
    traj.partition = p.partition;
    traj.options = c.step;
    if (m.at("knots").get<std::vector<double>>() != traj.partition.knots()) {
        throw ConfigError("manifest knots disagree with the configured partition");
    }
    const auto& states = m.at("states");
    const auto& means = m.at("forcing_means");
    if (states.size() != traj.partition.steps() + 1 || means.size() != traj.partition.steps()) {
        throw ConfigError("manifest does not list every step");
    }
    for (const auto& s : states) {
        traj.states.push_back(read_field_csv(dir / s.at("file").get<std::string>(), traj.grid));
    }
    const SparseOperator L = assemble_laplacian(traj.grid);
    for (std::size_t k = 1; k < traj.states.size(); ++k) {
        traj.forcing_means.push_back(read_field_csv(dir / means[k - 1].at("file").get<std::string>(), traj.grid));
        traj.certificates.push_back(certify_step(traj.grid, L, traj.states[k - 1], traj.states[k],
                                                 traj.forcing_means.back(), traj.partition.tau(k)));
    }
    const std::vector<Report> reports = detail::analyse(traj, c, p);
    nlohmann::json j = detail::report_document("verify", reports, p.warnings);
    write_json(dir / "verify.json", j);
    detail::summarise(log, reports);
    return j["passed"].get<bool>() ? kExitPass : kExitChecksFailed;
}

/// Solves the steady obstacle problem for f_∞ with obstacle u_0 and writes steady.csv and report.json.
inline int steady(const RunConfig& c, std::ostream& log, const std::optional<std::filesystem::path>& out = {}) {
    if (!c.f_inf) {
        throw ConfigError("f_inf: required by the steady verb");
    }
    const auto dir = detail::output_dir(c, out);
    std::filesystem::create_directories(dir);
    const PreparedRun p = prepare(c);
    SolverOptions opt = c.step.solver;
    const SteadyState s = solve_steady_state(p.grid, p.u0, *p.f_inf, opt);
    write_field_csv(dir / "steady.csv", p.grid, s.z);

    Report r;
    r.name = "steady_kkt";
    const double tol = opt.tol * s.kkt.scale;
    r.add("feasibility", s.kkt.feasibility, tol);
    r.add("dual", s.kkt.dual, tol);
    r.add("complementarity", s.kkt.complementarity, tol);
    r.add("k2_upper", s.kkt.k2_upper, tol);
    const std::vector<Report> reports{r};
    nlohmann::json j = detail::report_document("steady", reports, {});
    write_json(dir / "report.json", j);
    detail::summarise(log, reports);
    return r.passed() ? kExitPass : kExitChecksFailed;
}

/**
 * Runs two configurations on a shared grid and partition and checks the
 * ordering and continuous-dependence estimates. The ordering hypothesis is
 * verified on the sampled data before either solve.
 */
inline int compare_runs(const RunConfig& c1, const RunConfig& c2, std::ostream& log,
                        const std::optional<std::filesystem::path>& out = {}) {
    const PreparedRun p1 = prepare(c1);
    const PreparedRun p2 = prepare(c2);
    if (!(p1.grid == p2.grid)) {
        throw ConfigError("compare: the two configurations use different grids");
    }
    if (p1.partition.knots() != p2.partition.knots()) {
        throw ConfigError("compare: the two configurations use different partitions");
    }
    for (std::size_t i = 0; i < p1.u0.size(); ++i) {
        if (p1.u0[i] > p2.u0[i]) {
            throw PreconditionError("compare: u0 of the first run exceeds the second at unknown " +
                                        std::to_string(i),
                                    i);
        }
    }
    for (std::size_t k = 0; k < p1.partition.knots().size(); ++k) {
        const double t = p1.partition.knot(k);
        const Field f1 = p1.forcing.at(p1.grid, t);
        const Field f2 = p2.forcing.at(p2.grid, t);
        for (std::size_t i = 0; i < f1.size(); ++i) {
            if (f1[i] > f2[i]) {
                throw PreconditionError("compare: f of the first run exceeds the second at unknown " +
                                            std::to_string(i) + ", t = " + format_double(t),
                                        i);
            }
        }
    }

    const auto dir = out ? *out : c1.output_dir;
    std::filesystem::create_directories(dir);
    Trajectory a = run({p1.grid, p1.u0, p1.forcing, p1.partition, c1.step});
    Trajectory b = run({p2.grid, p2.u0, p2.forcing, p2.partition, c2.step});
    detail::write_trajectory(dir / "first", a, c1, true);
    detail::write_trajectory(dir / "second", b, c2, true);

    const double tol = std::min(c1.checks.tol, c2.checks.tol);
    std::vector<Report> reports{comparison_report(a, b, std::min(tol, 1e-9)), continuous_dependence_report(a, b, tol)};
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < a.states.size(); ++k) {
        for (std::size_t i = 0; i < a.states[k].size(); ++i) {
            min_gap = std::min(min_gap, b.states[k][i] - a.states[k][i]);
        }
    }
    if (a.states.size() > 1) {
        reports.front().add("min_gap_after_start", min_gap, 0.0, false);
    }
    nlohmann::json j = detail::report_document("compare", reports, {});
    write_json(dir / "report.json", j);
    detail::summarise(log, reports);
    return j["passed"].get<bool>() ? kExitPass : kExitChecksFailed;
}

} // namespace unidiff
