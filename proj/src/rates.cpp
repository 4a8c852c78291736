#include "uavsec/rates.hpp"

#include "uavsec/channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace uavsec {

LinkGains::LinkGains(const TrajectorySet& traj, const Scenario& s)
    : uavs_(s.num_uavs()), users_(s.num_users()), eves_(s.num_eves()) {
    const int N = s.num_slots;
    user_.resize(static_cast<std::size_t>(N) * uavs_ * users_);
    eve_.resize(static_cast<std::size_t>(N) * uavs_ * eves_);
    for (int n = 0; n < N; ++n) {
        for (int m = 0; m < uavs_; ++m) {
            const Vec2 q = traj.at_slot(m, n);
            for (int k = 0; k < users_; ++k)
                user_[(n * uavs_ + m) * users_ + k] =
                    channel_gain(q, s.users[k], s.altitude, s.ref_gain);
            for (int e = 0; e < eves_; ++e)
                eve_[(n * uavs_ + m) * eves_ + e] =
                    channel_gain(q, s.eves[e], s.altitude, s.ref_gain);
        }
    }
}

double user_interference(int n, int m, int k, int i, const AllocationState& st,
                         const LinkGains& g) {
    double sum = 0.0;
    for (int j = 0; j < st.uavs(); ++j) {
        if (j != m) sum += st.jam_tx(n, j, i) * g.user(n, j, k);
    }
    return sum;
}

double eve_interference(int n, int m, int e, int i, const AllocationState& st,
                        const LinkGains& g) {
    double sum = 0.0;
    for (int j = 0; j < st.uavs(); ++j) {
        if (j != m) sum += st.jam_tx(n, j, i) * g.eve(n, j, e);
    }
    return sum;
}

double sinr_user(int n, int m, int k, int i, const AllocationState& st, const LinkGains& g,
                 const Scenario& s) {
    return st.power(n, m, k, i) * g.user(n, m, k) /
           (user_interference(n, m, k, i, st, g) + s.noise_power);
}

double sinr_eve(int n, int m, int k, int e, int i, const AllocationState& st, const LinkGains& g,
                const Scenario& s) {
    return st.power(n, m, k, i) * g.eve(n, m, e) /
           (eve_interference(n, m, e, i, st, g) + s.noise_power);
}

double rate_user(int n, int m, int k, int i, const AllocationState& st, const LinkGains& g,
                 const Scenario& s) {
    const double sched = st.sched(n, m, k, i);
    if (sched == 0.0) return 0.0;
    return sched * std::log2(1.0 + sinr_user(n, m, k, i, st, g, s));
}

double leakage_rate(int n, int m, int k, int e, int i, const AllocationState& st,
                    const LinkGains& g, const Scenario& s) {
    const double sched = st.sched(n, m, k, i);
    if (sched == 0.0) return 0.0;
    return sched * std::log2(1.0 + sinr_eve(n, m, k, e, i, st, g, s));
}

double secrecy_term(int n, int m, int k, int i, const AllocationState& st, const LinkGains& g,
                    const Scenario& s) {
    if (st.sched(n, m, k, i) == 0.0) return 0.0;
    double worst = 0.0;
    for (int e = 0; e < s.num_eves(); ++e)
        worst = std::max(worst, leakage_rate(n, m, k, e, i, st, g, s));
    return rate_user(n, m, k, i, st, g, s) - worst;
}

double avg_secrecy_rate(int k, const AllocationState& st, const LinkGains& g, const Scenario& s) {
    double sum = 0.0;
    for (int n = 0; n < s.num_slots; ++n) {
        for (int m = 0; m < s.num_uavs(); ++m) {
            for (int i = 0; i < s.num_subcarriers; ++i)
                sum += std::max(0.0, secrecy_term(n, m, k, i, st, g, s));
        }
    }
    return sum / s.num_slots;
}

AllocationState clip_negative_terms(const AllocationState& st, const LinkGains& g, const Scenario& s) {
    AllocationState out = st;
    for (int n = 0; n < s.num_slots; ++n) {
        for (int m = 0; m < s.num_uavs(); ++m) {
            for (int k = 0; k < s.num_users(); ++k) {
                for (int i = 0; i < s.num_subcarriers; ++i) {
                    if (secrecy_term(n, m, k, i, st, g, s) < 0.0) {
                        out.sched(n, m, k, i) = 0.0;
                        out.power(n, m, k, i) = 0.0;
                    }
                }
            }
        }
    }
    return out;
}

double avg_secrecy_rate(int k, const AllocationState& st, const TrajectorySet& traj,
                        const Scenario& s) {
    return avg_secrecy_rate(k, st, LinkGains(traj, s), s);
}

std::vector<double> per_user_secrecy(const AllocationState& st, const LinkGains& g,
                                     const Scenario& s) {
    std::vector<double> out(s.num_users());
    for (int k = 0; k < s.num_users(); ++k) out[k] = avg_secrecy_rate(k, st, g, s);
    return out;
}

double pair_secrecy(int k, int e, const AllocationState& st, const LinkGains& g,
                    const Scenario& s) {
    double sum = 0.0;
    for (int n = 0; n < s.num_slots; ++n) {
        for (int m = 0; m < s.num_uavs(); ++m) {
            for (int i = 0; i < s.num_subcarriers; ++i) {
                sum += rate_user(n, m, k, i, st, g, s) - leakage_rate(n, m, k, e, i, st, g, s);
            }
        }
    }
    return sum / s.num_slots;
}

double objective(const AllocationState& st, const LinkGains& g, const Scenario& s) {
    if (s.num_users() == 0) return 0.0;
    double eta = std::numeric_limits<double>::infinity();
    for (int k = 0; k < s.num_users(); ++k) eta = std::min(eta, avg_secrecy_rate(k, st, g, s));
    return eta;
}

double objective(const AllocationState& st, const TrajectorySet& traj, const Scenario& s) {
    return objective(st, LinkGains(traj, s), s);
}

bool ConstraintReport::all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

const ConstraintCheck& ConstraintReport::get(const std::string& name) const {
    for (const auto& c : checks) {
        if (c.name == name) return c;
    }
    throw std::out_of_range("no constraint named " + name);
}

namespace {

double binary_gap(double x) { return std::min(std::abs(x), std::abs(x - 1.0)); }

}  // namespace

ConstraintReport check_constraints(const AllocationState& st, const TrajectorySet& traj,
                                   const Scenario& s, double tol) {
    const int N = s.num_slots, M = s.num_uavs(), K = s.num_users(), F = s.num_subcarriers;
    double binary_comm = 0, binary_jam = 0, exclusive = 0, role = 0, peak = 0, nonneg = 0;
    for (int n = 0; n < N; ++n) {
        for (int i = 0; i < F; ++i) {
            double per_cell = 0.0;
            for (int m = 0; m < M; ++m) {
                double per_uav = st.jam_sched(n, m, i);
                binary_jam = std::max(binary_jam, binary_gap(st.jam_sched(n, m, i)));
                nonneg = std::max(nonneg, -st.jam_power(n, m, i));
                for (int k = 0; k < K; ++k) {
                    binary_comm = std::max(binary_comm, binary_gap(st.sched(n, m, k, i)));
                    nonneg = std::max(nonneg, -st.power(n, m, k, i));
                    per_cell += st.sched(n, m, k, i);
                    per_uav += st.sched(n, m, k, i);
                }
                role = std::max(role, per_uav - 1.0);
            }
            exclusive = std::max(exclusive, per_cell - 1.0);
        }
        for (int m = 0; m < M; ++m)
            peak = std::max(peak, st.total_power(n, m) - s.uavs[m].peak_power);
    }

    double speed = 0, nfz = 0, separation = 0, start = 0, end = 0;
    const double V = s.max_step();
    for (int m = 0; m < M; ++m) {
        const auto& path = traj.paths[m];
        for (int n = 0; n + 1 < path.cols(); ++n)
            speed = std::max(speed, (path.col(n + 1) - path.col(n)).norm() - V);
        for (int n = 0; n < path.cols(); ++n) {
            for (const auto& z : s.nfzs)
                nfz = std::max(nfz, z.radius - (path.col(n) - z.center).norm());
            for (int j = m + 1; j < M; ++j) {
                separation = std::max(separation,
                                      s.safety_distance - (path.col(n) - traj.paths[j].col(n)).norm());
            }
        }
        start = std::max(start, (path.col(0) - s.uavs[m].start).norm());
        end = std::max(end, (path.col(path.cols() - 1) - s.uavs[m].end).norm());
    }

    ConstraintReport r;
    auto add = [&](const char* name, double worst) {
        worst = std::max(0.0, worst);
        r.checks.push_back({name, worst <= tol, worst});
    };
    add("binary_comm", binary_comm);
    add("binary_jam", binary_jam);
    add("subcarrier_exclusive", exclusive);
    add("role_exclusive", role);
    add("peak_power", peak);
    add("nonneg_power", nonneg);
    add("speed", speed);
    add("nfz", nfz);
    add("separation", separation);
    add("start", start);
    add("end", end);
    return r;
}

}  // namespace uavsec
