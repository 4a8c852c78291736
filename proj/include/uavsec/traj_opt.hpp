#pragma once

#include "uavsec/allocation.hpp"
#include "uavsec/convex_core.hpp"
#include "uavsec/scenario.hpp"

#include <optional>
#include <vector>

namespace uavsec {

/// { q : normal . q >= offset }.
struct HalfPlane {
    Vec2 normal = Vec2::Zero();
    double offset = 0.0;

    double slack(const Vec2& q) const { return normal.dot(q) - offset; }
};

/// Inner approximation of ||q - c|| >= r at the expansion point q0: the
/// tangent half-plane of the linearized squared distance. Throws when q0 is
/// the center.
HalfPlane nfz_half_plane(const Vec2& q0, const NoFlyZone& z);

/// Inner approximation of ||q_a - q_b|| >= d at (a0, b0), as a half-plane in
/// the difference q_a - q_b. Throws when a0 == b0.
HalfPlane separation_half_plane(const Vec2& a0, const Vec2& b0, double d);

/// Straight lines at uniform speed, detoured around every no-fly zone along
/// a circumscribed tangent polyline (radius + 1 m) and resampled to N equal
/// arc-length steps; waypoints closer than the safety distance to an
/// earlier UAV are pushed sideways by D_S.
TrajectorySet initial_trajectory(const Scenario& s);

/// `base` with UAV m re-planned to fly to `target` at full speed, hover and
/// fly on to its end point (detouring around no-fly zones). When the target
/// is out of reach in time the hover point is pulled back toward the
/// straight path. Empty when no such path fits or it breaks a constraint.
std::optional<TrajectorySet> visit_trajectory(const TrajectorySet& base, int m, const Vec2& target,
                                              const Scenario& s);

/// Squared UAV-to-ground distances of every (slot, uav, node), nodes being
/// users then eves. `upper` bounds d^2 from above and `lower` from below;
/// the SCA expands both at equality.
struct TrajIterate {
    TrajectorySet traj;
    std::vector<double> upper, lower;
    int uavs = 0, nodes = 0;

    double& t(int n, int m, int node) { return upper[(n * uavs + m) * nodes + node]; }
    double t(int n, int m, int node) const { return upper[(n * uavs + m) * nodes + node]; }
    double& t_lb(int n, int m, int node) { return lower[(n * uavs + m) * nodes + node]; }
    double t_lb(int n, int m, int node) const { return lower[(n * uavs + m) * nodes + node]; }
};

/// Slacks at the exact squared distances of `traj`. Throws when a waypoint
/// lies inside a no-fly zone.
TrajIterate init_slacks(const TrajectorySet& traj, const Scenario& s);

/// Concave restriction of the per-(user, eve) secrecy constraints in the
/// waypoints, built around a TrajIterate.
///
/// Variable layout: x[0] = eta, then (x, y) of waypoints 1..N-1 of every UAV;
/// start and end waypoints are constants.
class TrajSurrogate {
public:
    TrajSurrogate(const AllocationState& st, const Scenario& s);

    int num_vars() const { return 1 + 2 * s_.num_uavs() * (s_.num_slots - 1); }
    int num_pairs() const { return users_ * eves_; }
    /// Variable of coordinate d of UAV m at waypoint w, -1 when pinned.
    int var(int m, int w, int d) const;

    Eigen::VectorXd point_of(const TrajectorySet& traj, double eta = 0.0) const;
    TrajectorySet traj_of(const Eigen::VectorXd& x, const TrajectorySet& pinned) const;

    /// Exact unclipped per-(user, eve) average secrecy, bps/Hz.
    std::vector<double> pair_secrecy(const TrajectorySet& traj) const;
    /// Surrogate of the same quantities expanded at `at`.
    std::vector<double> pair_lower_bound(const TrajectorySet& traj, const TrajIterate& at) const;

    cvx::Program build(const TrajIterate& at) const;

private:
    struct Tx {
        int n, m, k;
        double signal;  // p beta0 / sigma^2
        std::vector<std::pair<int, double>> jammers;  // (uav, p_J beta0 / sigma^2)
    };
    void add_pair(cvx::Expression& g, int k, int e, const TrajIterate& at) const;
    cvx::Affine lower_sq(int m, int w, int node, const TrajIterate& at) const;

    const Scenario& s_;
    int users_, eves_;
    std::vector<Tx> txs_;
};

struct TrajOptions {
    int max_sca = 40;
    double tol = 1e-4;  // relative change of the smallest pair
    bool record_iterates = false;
    cvx::Options solver = {1e-8, 400, 1e-3, 10.0, 64};
};

struct TrajResult {
    TrajectorySet traj;
    double eta = 0.0;        // oracle objective of `traj`
    bool accepted = false;   // false when the incoming trajectory was kept
    bool solver_failed = false;
    int iterations = 0;
    std::vector<TrajectorySet> iterates;  // every SCA iterate, when recorded
    std::vector<double> surrogate_trace;  // smallest exact pair per iterate
};

/// Trajectories for fixed communication and jamming. The incoming
/// trajectory must satisfy the speed, no-fly, separation and endpoint
/// constraints; so does every iterate. Never returns an oracle objective
/// below that of `traj_in`.
TrajResult solve_traj(const AllocationState& st, const TrajectorySet& traj_in, const Scenario& s,
                      const TrajOptions& opts = {});

}  // namespace uavsec
