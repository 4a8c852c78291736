#pragma once

#include "uavsec/allocation.hpp"
#include "uavsec/scenario.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace uavsec::testing {

/// Bare instance with the default channel constants and no NFZ.
inline Scenario bare_scenario(int slots, int subcarriers) {
    Scenario s;
    s.num_slots = slots;
    s.slot_duration = 1.0;
    s.altitude = 100.0;
    s.max_speed = 20.0;
    s.safety_distance = 50.0;
    s.num_subcarriers = subcarriers;
    s.ref_gain = 1e-5;
    s.noise_power = 1e-13;
    return s;
}

/// Trajectory that parks every UAV at its end point (start == end).
inline TrajectorySet parked(const Scenario& s) {
    TrajectorySet t;
    for (const auto& u : s.uavs) {
        Eigen::Matrix2Xd p(2, s.num_slots + 1);
        for (int n = 0; n <= s.num_slots; ++n) p.col(n) = u.end;
        t.paths.push_back(p);
    }
    return t;
}

/// Horizontal offset from a ground point that yields channel gain `h`.
inline double offset_for_gain(double h, const Scenario& s) {
    const double d2 = s.ref_gain / h;
    return std::sqrt(std::max(0.0, d2 - s.altitude * s.altitude));
}

/// 1-slot, 1-subcarrier, one UAV per user/eve-style random instance. Users
/// and eves scattered in a 400 m box around a single UAV at the origin.
inline Scenario random_single(std::mt19937& rng, int uavs, int users, int eves, int subcarriers) {
    Scenario s = bare_scenario(1, subcarriers);
    std::uniform_real_distribution<double> pos(-200.0, 200.0);
    for (int m = 0; m < uavs; ++m) {
        const Vec2 p(60.0 * m, 0.0);
        s.uavs.push_back({p, p, 1.0});
    }
    for (int k = 0; k < users; ++k) s.users.emplace_back(pos(rng), pos(rng));
    for (int e = 0; e < eves; ++e) s.eves.emplace_back(pos(rng), pos(rng));
    return s;
}

/// Random allocation satisfying C4-C6: each (slot, subcarrier) goes to one
/// random (uav, user) or nobody, idle UAVs may jam, and every UAV's slot
/// total is scaled into its budget.
inline AllocationState random_state(std::mt19937& rng, const Scenario& s) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    AllocationState st = AllocationState::zeros(s);
    for (int n = 0; n < s.num_slots; ++n) {
        for (int i = 0; i < s.num_subcarriers; ++i) {
            if (u(rng) < 0.8) {
                const int m = static_cast<int>(u(rng) * s.num_uavs());
                const int k = static_cast<int>(u(rng) * s.num_users());
                st.sched(n, m, k, i) = 1;
                st.power(n, m, k, i) = u(rng);
            }
            for (int m = 0; m < s.num_uavs(); ++m) {
                double used = 0.0;
                for (int k = 0; k < s.num_users(); ++k) used += st.sched(n, m, k, i);
                if (used == 0.0 && u(rng) < 0.5) {
                    st.jam_sched(n, m, i) = 1;
                    st.jam_power(n, m, i) = u(rng);
                }
            }
        }
        for (int m = 0; m < s.num_uavs(); ++m) {
            const double total = st.total_power(n, m);
            if (total <= 0.0) continue;
            const double scale = s.uavs[m].peak_power * u(rng) / total;
            for (int i = 0; i < s.num_subcarriers; ++i) {
                for (int k = 0; k < s.num_users(); ++k) st.power(n, m, k, i) *= scale;
                st.jam_power(n, m, i) *= scale;
            }
        }
    }
    return st;
}

}  // namespace uavsec::testing
