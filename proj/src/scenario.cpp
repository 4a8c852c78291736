#include "uavsec/scenario.hpp"

#include "uavsec/channel.hpp"

#include <json.hpp>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace uavsec {

namespace {

using json = nlohmann::json;

[[noreturn]] void schema_error(const std::string& what) {
    throw ScenarioError("scenario schema violation: " + what);
}

// Every numeric field is spelled `<base>_<unit>`; `fields` maps base -> full key.
void check_keys(const json& obj, const std::string& where,
                const std::map<std::string, std::string>& fields,
                const std::set<std::string>& optional = {}) {
    if (!obj.is_object()) schema_error(where + " must be an object");
    for (const auto& [key, _] : obj.items()) {
        bool known = false;
        for (const auto& [base, full] : fields) {
            if (key == full) {
                known = true;
                break;
            }
            if (key == base || (key.rfind(base + "_", 0) == 0 && full != base)) {
                throw ScenarioError("scenario unit annotation missing or wrong for '" + where +
                                    "." + key + "' (expected '" + full + "')");
            }
        }
        if (!known) schema_error("unknown key '" + where + "." + key + "'");
    }
    for (const auto& [base, full] : fields) {
        if (!obj.contains(full) && !optional.count(full)) {
            schema_error("missing key '" + where + "." + full + "'");
        }
    }
}

double number(const json& obj, const std::string& key, const std::string& where) {
    const json& v = obj.at(key);
    if (!v.is_number()) schema_error("'" + where + "." + key + "' must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) schema_error("'" + where + "." + key + "' is not finite");
    return x;
}

Vec2 point(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        schema_error("'" + where + "' must be a [x, y] pair of numbers");
    }
    Vec2 p(v[0].get<double>(), v[1].get<double>());
    if (!p.allFinite()) schema_error("'" + where + "' is not finite");
    return p;
}

std::vector<Vec2> points(const json& v, const std::string& where) {
    if (!v.is_array()) schema_error("'" + where + "' must be an array");
    std::vector<Vec2> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(point(v[i], where + "[" + std::to_string(i) + "]"));
    }
    return out;
}

int slots_for(double mission_time, double dt) {
    const double ratio = mission_time / dt;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
        throw ScenarioError("mission time " + std::to_string(mission_time) +
                            " s is not a whole number of slots of " + std::to_string(dt) + " s");
    }
    return static_cast<int>(rounded);
}

}  // namespace

Scenario load_scenario(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        schema_error(std::string("not a valid document (") + e.what() + ")");
    }
    if (!doc.is_object()) schema_error("top level must be an object");
    static const std::set<std::string> top = {"time",  "channel", "geometry", "uavs",
                                              "users", "eves",    "nfzs",     "subcarriers"};
    for (const auto& [key, _] : doc.items()) {
        if (!top.count(key)) schema_error("unknown key '" + key + "'");
    }
    for (const auto& key : top) {
        if (!doc.contains(key)) schema_error("missing key '" + key + "'");
    }

    Scenario s;
    const json& time = doc["time"];
    check_keys(time, "time", {{"T", "T_s"}, {"dt", "dt_s"}});
    const double T = number(time, "T_s", "time");
    s.slot_duration = number(time, "dt_s", "time");
    if (s.slot_duration <= 0.0) schema_error("'time.dt_s' must be positive");
    s.num_slots = slots_for(T, s.slot_duration);

    const json& channel = doc["channel"];
    check_keys(channel, "channel",
               {{"beta0", "beta0_dB"},
                {"noise", "noise_dBm"},
                {"bandwidth", "bandwidth_Hz"},
                {"carrier", "carrier_Hz"}},
               {"bandwidth_Hz", "carrier_Hz"});
    s.ref_gain = db_to_linear(number(channel, "beta0_dB", "channel"));
    s.noise_power = dbm_to_watts(number(channel, "noise_dBm", "channel"));
    if (channel.contains("bandwidth_Hz")) s.bandwidth_hz = number(channel, "bandwidth_Hz", "channel");
    if (channel.contains("carrier_Hz")) s.carrier_hz = number(channel, "carrier_Hz", "channel");

    const json& geometry = doc["geometry"];
    check_keys(geometry, "geometry",
               {{"altitude", "altitude_m"}, {"vmax", "vmax_mps"}, {"safety", "safety_m"}});
    s.altitude = number(geometry, "altitude_m", "geometry");
    s.max_speed = number(geometry, "vmax_mps", "geometry");
    s.safety_distance = number(geometry, "safety_m", "geometry");

    const json& uavs = doc["uavs"];
    if (!uavs.is_array()) schema_error("'uavs' must be an array");
    for (std::size_t m = 0; m < uavs.size(); ++m) {
        const std::string where = "uavs[" + std::to_string(m) + "]";
        check_keys(uavs[m], where, {{"start", "start"}, {"end", "end"}, {"peak", "peak_dBm"}});
        UavSpec u;
        u.start = point(uavs[m]["start"], where + ".start");
        u.end = point(uavs[m]["end"], where + ".end");
        u.peak_power = dbm_to_watts(number(uavs[m], "peak_dBm", where));
        s.uavs.push_back(u);
    }

    s.users = points(doc["users"], "users");
    s.eves = points(doc["eves"], "eves");

    const json& nfzs = doc["nfzs"];
    if (!nfzs.is_array()) schema_error("'nfzs' must be an array");
    for (std::size_t j = 0; j < nfzs.size(); ++j) {
        const std::string where = "nfzs[" + std::to_string(j) + "]";
        check_keys(nfzs[j], where,
                   {{"center", "center"}, {"radius", "radius_m"}, {"height", "height_m"}});
        NoFlyZone z;
        z.center = point(nfzs[j]["center"], where + ".center");
        z.radius = number(nfzs[j], "radius_m", where);
        z.height = number(nfzs[j], "height_m", where);
        s.nfzs.push_back(z);
    }

    const json& nf = doc["subcarriers"];
    if (!nf.is_number_integer()) schema_error("'subcarriers' must be an integer");
    s.num_subcarriers = nf.get<int>();
    return s;
}

Scenario load_scenario_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot read scenario file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return load_scenario(buf.str());
}

std::string serialize_scenario(const Scenario& s) {
    json doc;
    doc["time"] = {{"T_s", s.mission_time()}, {"dt_s", s.slot_duration}};
    doc["channel"] = {{"beta0_dB", linear_to_db(s.ref_gain)},
                      {"noise_dBm", watts_to_dbm(s.noise_power)},
                      {"bandwidth_Hz", s.bandwidth_hz},
                      {"carrier_Hz", s.carrier_hz}};
    doc["geometry"] = {{"altitude_m", s.altitude},
                       {"vmax_mps", s.max_speed},
                       {"safety_m", s.safety_distance}};
    auto pt = [](const Vec2& p) { return json::array({p.x(), p.y()}); };
    doc["uavs"] = json::array();
    for (const auto& u : s.uavs) {
        doc["uavs"].push_back(
            {{"start", pt(u.start)}, {"end", pt(u.end)}, {"peak_dBm", watts_to_dbm(u.peak_power)}});
    }
    doc["users"] = json::array();
    for (const auto& w : s.users) doc["users"].push_back(pt(w));
    doc["eves"] = json::array();
    for (const auto& w : s.eves) doc["eves"].push_back(pt(w));
    doc["nfzs"] = json::array();
    for (const auto& z : s.nfzs) {
        doc["nfzs"].push_back(
            {{"center", pt(z.center)}, {"radius_m", z.radius}, {"height_m", z.height}});
    }
    doc["subcarriers"] = s.num_subcarriers;
    return doc.dump(2);
}

ValidationReport validate(const Scenario& s) {
    ValidationReport r;
    auto flag = [&](std::string msg) { r.violations.push_back(std::move(msg)); };

    if (s.num_slots < 1) flag("num_slots must be >= 1");
    if (!(s.slot_duration > 0.0)) flag("slot_duration must be > 0");
    if (s.num_subcarriers < 1) flag("num_subcarriers must be >= 1");
    if (s.uavs.empty()) flag("at least one UAV is required");
    if (s.users.empty()) flag("at least one user is required");
    if (!(s.altitude > 0.0)) flag("altitude must be > 0");
    if (!(s.max_speed > 0.0)) flag("max_speed must be > 0");
    if (!(s.safety_distance > 0.0)) flag("safety_distance must be > 0");
    if (!(s.ref_gain > 0.0) || !std::isfinite(s.ref_gain)) flag("ref_gain must be finite and > 0");
    if (!(s.noise_power > 0.0) || !std::isfinite(s.noise_power)) {
        flag("noise_power must be finite and > 0");
    }

    for (std::size_t j = 0; j < s.nfzs.size(); ++j) {
        const auto& z = s.nfzs[j];
        if (!(z.radius > 0.0)) flag("nfz " + std::to_string(j) + ": radius must be > 0");
        if (!(z.height > s.altitude)) {
            flag("nfz " + std::to_string(j) + ": height must exceed the flight altitude");
        }
    }

    for (std::size_t m = 0; m < s.uavs.size(); ++m) {
        const auto& u = s.uavs[m];
        const std::string tag = "uav " + std::to_string(m);
        if (!(u.peak_power > 0.0)) flag(tag + ": peak power must be > 0");
        for (std::size_t j = 0; j < s.nfzs.size(); ++j) {
            // Endpoints must lie strictly outside each disk.
            if ((u.start - s.nfzs[j].center).norm() <= s.nfzs[j].radius) {
                flag(tag + ": start position inside nfz " + std::to_string(j));
            }
            if ((u.end - s.nfzs[j].center).norm() <= s.nfzs[j].radius) {
                flag(tag + ": end position inside nfz " + std::to_string(j));
            }
        }
        for (std::size_t o = m + 1; o < s.uavs.size(); ++o) {
            if ((u.start - s.uavs[o].start).norm() < s.safety_distance) {
                flag("uavs " + std::to_string(m) + "," + std::to_string(o) +
                     ": start positions closer than the safety distance");
            }
            if ((u.end - s.uavs[o].end).norm() < s.safety_distance) {
                flag("uavs " + std::to_string(m) + "," + std::to_string(o) +
                     ": end positions closer than the safety distance");
            }
        }
        const double need = (u.end - u.start).norm();
        const double reach = s.num_slots * s.max_step();
        if (need > reach * (1.0 + 1e-12)) {
            r.reachable = false;
            std::ostringstream os;
            os << tag << ": unreachable, " << need << " m > " << reach << " m";
            flag(os.str());
        }
    }
    return r;
}

Scenario default_scenario() {
    Scenario s;
    s.num_slots = 60;
    s.slot_duration = 1.0;
    s.uavs = {{Vec2(0, 0), Vec2(500, 0), 1.0}, {Vec2(0, 500), Vec2(500, 500), 1.0}};
    s.users = {Vec2(50, 50), Vec2(400, 450)};
    s.eves = {Vec2(70, 70), Vec2(150, 250), Vec2(250, 150)};
    s.nfzs = {{Vec2(150, 325), 60.0, 150.0}, {Vec2(350, 325), 60.0, 150.0}};
    s.altitude = 100.0;
    s.max_speed = 20.0;
    s.safety_distance = 50.0;
    s.num_subcarriers = 16;
    s.ref_gain = 1e-5;
    s.noise_power = 1e-13;
    return s;
}

Scenario with_mission_time(Scenario s, double seconds) {
    s.num_slots = slots_for(seconds, s.slot_duration);
    return s;
}

Scenario with_peak_power_dbm(Scenario s, double dbm) {
    for (auto& u : s.uavs) u.peak_power = dbm_to_watts(dbm);
    return s;
}

}  // namespace uavsec
