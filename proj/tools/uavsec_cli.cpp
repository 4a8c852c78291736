#include "uavsec/artifacts.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <sstream>

using namespace uavsec;

namespace {

std::vector<std::string> split(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

int code(ExitCode c) { return static_cast<int>(c); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Secure multi-UAV OFDMA trajectory, scheduling and jamming solver"};
    RunManifest m;
    std::string scenario, schemes = "pa", out = "out", axis, values;
    app.add_option("--scenario", scenario, "scenario JSON (default: built-in default scenario)");
    app.add_option("--scheme", schemes, "pa, nj or sp; a comma list is allowed with --sweep");
    app.add_option("--out", out, "output directory")->capture_default_str();
    app.add_option("--tol", m.tol, "relative eta change for convergence")->capture_default_str();
    app.add_option("--max-iter", m.max_iter, "outer iteration cap")->capture_default_str();
    app.add_option("--seed", m.seed, "recorded in report.json")->capture_default_str();
    app.add_option("--sweep", axis, "mission_time or peak_power");
    app.add_option("--values", values, "ascending comma list: seconds or dBm");
    app.add_flag("--record-runtime", m.record_runtime, "write wall-clock seconds into metrics.json");
    app.set_version_flag("--version", kVersion);
    CLI11_PARSE(app, argc, argv);

    try {
        m.scenario_path = scenario;
        m.out_dir = out;
        m.schemes.clear();
        for (const auto& s : split(schemes)) m.schemes.push_back(parse_scheme(s));
        if (m.schemes.empty()) throw std::invalid_argument("no scheme given");

        if (!axis.empty()) {
            const SweepAxis a = parse_axis(axis);
            std::vector<double> v;
            for (const auto& s : split(values)) v.push_back(std::stod(s));
            const auto rows = sweep(m, a, v);
            std::fputs(sweep_csv(rows).c_str(), stdout);
            return code(ExitCode::ok);
        }
        if (m.schemes.size() != 1) throw std::invalid_argument("a single run takes one scheme");

        const SolveReport r = run(m);
        std::printf("%s eta %.6f bps/Hz, %zu iterations, %s, constraints %s\n", to_string(r.scheme).c_str(), r.eta,
                    r.iterations.size(), r.converged ? "converged" : "not converged",
                    r.constraints.all_pass() ? "pass" : "FAIL");
        return code(exit_code(r));
    } catch (const InfeasibleScenario& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return code(ExitCode::infeasible);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return code(ExitCode::usage);
    }
}
