#pragma once

#include "uavsec/orchestrator.hpp"
#include "uavsec/scenario.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace uavsec {

inline constexpr const char* kVersion = "0.1.0";

/// Everything that determines a run. An empty scenario path means the
/// built-in default scenario.
struct RunManifest {
    std::vector<Scheme> schemes = {Scheme::pa};
    std::filesystem::path scenario_path;
    std::filesystem::path out_dir = "out";
    double tol = 1e-4;
    int max_iter = 30;
    std::uint64_t seed = 0;  // recorded only; the solvers draw no random numbers
    bool record_runtime = false;  // wall-clock seconds in metrics.json
    std::string version = kVersion;
};

enum class ExitCode : int { ok = 0, usage = 1, infeasible = 2, solver_failure = 3 };

/// Waypoint rows (slot, uav, x_m, y_m, role); slot 0 is the start position
/// and carries role idle.
std::string trajectory_csv(const SolveReport& r, const Scenario& s);
/// One row per (slot, uav, subcarrier); user -1 when not communicating.
std::string allocation_csv(const SolveReport& r, const Scenario& s);
/// Deterministic: runtime_s is null unless `runtime_s` is given.
nlohmann::ordered_json metrics_json(const SolveReport& r, std::optional<double> runtime_s);
/// Trace, per-block timings and flags, constraint report and manifest.
nlohmann::ordered_json report_json(const SolveReport& r, const RunManifest& m);

Scenario load_manifest_scenario(const RunManifest& m);
SolveOptions solve_options(const RunManifest& m);

/// Exit status of a finished solve: ok only when converged with every
/// constraint satisfied.
ExitCode exit_code(const SolveReport& r);

/// Solves the first scheme of the manifest and writes trajectory.csv,
/// allocation.csv, metrics.json and report.json into out_dir. Throws
/// InfeasibleScenario, UnsupportedConfiguration, ScenarioError or
/// std::runtime_error (unwritable output).
SolveReport run(const RunManifest& m);

enum class SweepAxis { mission_time, peak_power };
SweepAxis parse_axis(const std::string& name);
std::string to_string(SweepAxis a);

struct SweepRow {
    double axis_value = 0.0;
    Scheme scheme = Scheme::pa;
    double eta = 0.0;
    bool converged = false;
    double seconds = 0.0;
};

/// One solve per value per scheme; infeasible points give eta 0 and
/// converged false. Values must be nonempty and ascending. Writes
/// sweep.csv into out_dir.
std::vector<SweepRow> sweep(const RunManifest& m, SweepAxis axis, const std::vector<double>& values);
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace uavsec
