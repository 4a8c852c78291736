#include "uavsec/artifacts.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace uavsec {

namespace {

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

/// Role of UAV m at waypoint w; allocation slot w - 1 flies at waypoint w.
const char* role(const AllocationState& st, int w, int m) {
    if (w == 0) return "idle";
    const int n = w - 1;
    bool jam = false;
    for (int i = 0; i < st.subcarriers(); ++i) {
        for (int k = 0; k < st.users(); ++k) {
            if (st.sched(n, m, k, i) == 1.0) return "comm";
        }
        jam |= st.jam_sched(n, m, i) == 1.0 && st.jam_power(n, m, i) > 0.0;
    }
    return jam ? "jam" : "idle";
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << text;
    if (!f) throw std::runtime_error("cannot write " + p.string());
}

nlohmann::ordered_json block_json(const BlockRecord& b) {
    return {{"eta_bpshz", b.eta}, {"seconds", b.seconds}, {"accepted", b.accepted},
            {"failed", b.failed}, {"skipped", b.skipped}};
}

}  // namespace

std::string trajectory_csv(const SolveReport& r, const Scenario& s) {
    std::string out = "slot,uav,x_m,y_m,role\n";
    for (int w = 0; w <= s.num_slots; ++w) {
        for (int m = 0; m < s.num_uavs(); ++m) {
            const Vec2 q = r.traj.q(m, w);
            out += std::to_string(w) + "," + std::to_string(m) + "," + num(q.x()) + "," + num(q.y()) + "," +
                   role(r.state, w, m) + "\n";
        }
    }
    return out;
}

std::string allocation_csv(const SolveReport& r, const Scenario& s) {
    std::string out = "slot,uav,subcarrier,user,comm_power_w,jam_power_w\n";
    const AllocationState& st = r.state;
    for (int n = 0; n < s.num_slots; ++n) {
        for (int m = 0; m < s.num_uavs(); ++m) {
            for (int i = 0; i < s.num_subcarriers; ++i) {
                int user = -1;
                double p = 0.0;
                for (int k = 0; k < s.num_users(); ++k) {
                    if (st.sched(n, m, k, i) == 1.0) {
                        user = k;
                        p = st.power(n, m, k, i);
                    }
                }
                // slots are 1-based in the artifacts, matching waypoint indices
                out += std::to_string(n + 1) + "," + std::to_string(m) + "," + std::to_string(i) + "," +
                       std::to_string(user) + "," + num(p) + "," + num(st.jam_tx(n, m, i)) + "\n";
            }
        }
    }
    return out;
}

nlohmann::ordered_json metrics_json(const SolveReport& r, std::optional<double> runtime_s) {
    nlohmann::ordered_json j;
    j["eta_bpshz"] = r.eta;
    j["per_user_secrecy_bpshz"] = r.per_user;
    j["iterations"] = r.iterations.size();
    j["scheme"] = to_string(r.scheme);
    j["runtime_s"] = runtime_s ? nlohmann::ordered_json(*runtime_s) : nlohmann::ordered_json(nullptr);
    return j;
}

nlohmann::ordered_json report_json(const SolveReport& r, const RunManifest& m) {
    nlohmann::ordered_json j;
    j["scheme"] = to_string(r.scheme);
    j["eta_bpshz"] = r.eta;
    j["per_user_secrecy_bpshz"] = r.per_user;
    j["converged"] = r.converged;
    j["any_block_failure"] = r.any_failure;
    j["initial_trajectory"] = r.start;
    j["eta_trace"] = r.eta_trace;
    nlohmann::ordered_json its = nlohmann::ordered_json::array();
    for (const auto& it : r.iterations) {
        its.push_back({{"iteration", it.iteration},
                       {"comm", block_json(it.comm)},
                       {"jam", block_json(it.jam)},
                       {"traj", block_json(it.traj)}});
    }
    j["iterations"] = its;
    nlohmann::ordered_json cons = nlohmann::ordered_json::array();
    for (const auto& c : r.constraints.checks) {
        cons.push_back({{"name", c.name}, {"pass", c.pass}, {"worst", c.worst}});
    }
    j["constraints"] = cons;
    j["constraints_pass"] = r.constraints.all_pass();
    j["runtime_s"] = r.seconds;
    j["manifest"] = {{"scenario", m.scenario_path.empty() ? "default" : m.scenario_path.string()},
                     {"tol", m.tol},
                     {"max_iter", m.max_iter},
                     {"seed", m.seed},
                     {"version", m.version}};
    return j;
}

Scenario load_manifest_scenario(const RunManifest& m) {
    return m.scenario_path.empty() ? default_scenario() : load_scenario_file(m.scenario_path);
}

SolveOptions solve_options(const RunManifest& m) {
    SolveOptions o;
    o.tol = m.tol;
    o.max_iter = m.max_iter;
    return o;
}

ExitCode exit_code(const SolveReport& r) {
    return r.converged && r.constraints.all_pass() ? ExitCode::ok : ExitCode::solver_failure;
}

SolveReport run(const RunManifest& m) {
    if (m.schemes.empty()) throw std::invalid_argument("no scheme given");
    const Scenario s = load_manifest_scenario(m);
    const SolveReport r = solve(s, m.schemes.front(), solve_options(m));
    std::filesystem::create_directories(m.out_dir);
    write_file(m.out_dir / "trajectory.csv", trajectory_csv(r, s));
    write_file(m.out_dir / "allocation.csv", allocation_csv(r, s));
    const std::optional<double> runtime = m.record_runtime ? std::optional<double>(r.seconds) : std::nullopt;
    write_file(m.out_dir / "metrics.json", metrics_json(r, runtime).dump(2) + "\n");
    write_file(m.out_dir / "report.json", report_json(r, m).dump(2) + "\n");
    return r;
}

SweepAxis parse_axis(const std::string& name) {
    if (name == "mission_time") return SweepAxis::mission_time;
    if (name == "peak_power") return SweepAxis::peak_power;
    throw std::invalid_argument("unknown sweep axis: " + name);
}

std::string to_string(SweepAxis a) { return a == SweepAxis::mission_time ? "mission_time" : "peak_power"; }

std::vector<SweepRow> sweep(const RunManifest& m, SweepAxis axis, const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("sweep needs at least one value");
    if (!std::is_sorted(values.begin(), values.end())) throw std::invalid_argument("sweep values must ascend");
    const Scenario base = load_manifest_scenario(m);
    const SolveOptions o = solve_options(m);
    std::vector<SweepRow> rows;
    for (double v : values) {
        const Scenario s = axis == SweepAxis::mission_time ? with_mission_time(base, v) : with_peak_power_dbm(base, v);
        for (Scheme scheme : m.schemes) {
            SweepRow row;
            row.axis_value = v;
            row.scheme = scheme;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                const SolveReport r = solve(s, scheme, o);
                row.eta = r.eta;
                row.converged = r.converged;
            } catch (const InfeasibleScenario&) {
                row.eta = 0.0;
                row.converged = false;
            }
            row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            rows.push_back(row);
        }
    }
    std::filesystem::create_directories(m.out_dir);
    write_file(m.out_dir / "sweep.csv", sweep_csv(rows));
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "axis_value,scheme,eta_bpshz,converged,seconds\n";
    for (const auto& r : rows) {
        out += num(r.axis_value) + "," + to_string(r.scheme) + "," + num(r.eta) + "," +
               (r.converged ? "true" : "false") + "," + num(r.seconds) + "\n";
    }
    return out;
}

}  // namespace uavsec
