#pragma once

#include <Eigen/Core>

#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace uavsec {

using Vec2 = Eigen::Vector2d;

/// Cylindrical no-fly zone; only its ground disk constrains the trajectory.
struct NoFlyZone {
    Vec2 center = Vec2::Zero();
    double radius = 0.0;  // m
    double height = 0.0;  // m, must exceed the flight altitude
};

struct UavSpec {
    Vec2 start = Vec2::Zero();
    Vec2 end = Vec2::Zero();
    double peak_power = 0.0;  // W
};

/// A complete problem instance in linear SI units.
///
/// Slots are 1..N in the model; waypoint q[0] is the start position and
/// q[N] the end position, and the resource allocation of slot n uses q[n].
struct Scenario {
    int num_slots = 0;
    double slot_duration = 0.0;  // s
    std::vector<UavSpec> uavs;
    std::vector<Vec2> users;
    std::vector<Vec2> eves;
    std::vector<NoFlyZone> nfzs;
    double altitude = 0.0;         // m
    double max_speed = 0.0;        // m/s
    double safety_distance = 0.0;  // m
    int num_subcarriers = 0;
    double ref_gain = 0.0;     // linear, at 1 m
    double noise_power = 0.0;  // W per subcarrier

    // Carried for documentation only; rates are in bps/Hz.
    double bandwidth_hz = 2e6;
    double carrier_hz = 2e9;

    int num_uavs() const { return static_cast<int>(uavs.size()); }
    int num_users() const { return static_cast<int>(users.size()); }
    int num_eves() const { return static_cast<int>(eves.size()); }
    double mission_time() const { return num_slots * slot_duration; }
    /// Per-slot displacement cap V.
    double max_step() const { return max_speed * slot_duration; }
    /// Reference channel gain-to-noise ratio.
    double gain_to_noise() const { return ref_gain / noise_power; }
};

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ValidationReport {
    std::vector<std::string> violations;
    /// false when some UAV cannot reach its end point within N slots.
    bool reachable = true;

    bool feasible() const { return violations.empty() && reachable; }
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }
inline double dbm_to_watts(double dbm) { return db_to_linear(dbm - 30.0); }
inline double watts_to_dbm(double w) { return linear_to_db(w) + 30.0; }

/// Parses a JSON scenario document. Throws ScenarioError on any schema
/// violation, missing unit annotation or non-finite value.
Scenario load_scenario(std::string_view text);
Scenario load_scenario_file(const std::filesystem::path& path);

/// Inverse of load_scenario (dB / dBm fields re-emitted).
std::string serialize_scenario(const Scenario& s);

ValidationReport validate(const Scenario& s);

/// Two UAVs, two users, three eavesdroppers and two no-fly zones over a
/// 500 m x 500 m area, T = 60 s sampled every second.
Scenario default_scenario();

/// Same instance with a different mission time (slot duration kept).
Scenario with_mission_time(Scenario s, double seconds);
/// Same instance with every UAV's peak power set to `dbm`.
Scenario with_peak_power_dbm(Scenario s, double dbm);

}  // namespace uavsec
