#pragma once

#include "uavsec/allocation.hpp"
#include "uavsec/convex_core.hpp"
#include "uavsec/scenario.hpp"

#include <Eigen/Core>

#include <vector>

namespace uavsec {

/// Power left for jamming after communication, per (slot, uav), clipped at 0.
std::vector<double> residual_budget(const AllocationState& comm, const Scenario& s);

/// A jamming candidate: UAV m may jam subcarrier i in slot n because it does
/// not communicate there, has budget left and another UAV transmits there.
struct JamCell {
    int n = 0, m = 0, i = 0;
    double budget = 0.0;  // W
};

/// Penalized D.C. form of the jamming subproblem for fixed communication and
/// trajectories, and its convex restriction around an expansion point.
///
/// Variable layout: x[0] = eta, x[1 + 2c] = relaxed schedule s of cell c,
/// x[2 + 2c] = jamming power s * p of cell c. The true objective is
///   (1 - zeta) eta + zeta * mean_{user, eve} secrecy - phi * sum (s - s^2)
/// and every per-pair secrecy must stay above eta.
class JamSurrogate {
public:
    JamSurrogate(const AllocationState& comm, const TrajectorySet& traj, const Scenario& s,
                 double zeta, const std::vector<bool>& can_jam = {});

    const std::vector<JamCell>& cells() const { return cells_; }
    int num_vars() const { return 1 + 2 * static_cast<int>(cells_.size()); }
    int num_pairs() const { return users_ * eves_; }

    /// Candidate point of a jamming policy (eta set to the smallest pair).
    Eigen::VectorXd point_of(const AllocationState& jam) const;
    /// Writes the (possibly fractional) point into a copy of the
    /// communication state: schedule rounded at 0.5, power = relaxed power.
    AllocationState rounded(const Eigen::VectorXd& x) const;

    /// Exact per-(user, eve) average secrecy, unclipped, bps/Hz.
    std::vector<double> pair_secrecy(const Eigen::VectorXd& x) const;
    /// Same, with every convex log term linearized at `at`.
    std::vector<double> pair_lower_bound(const Eigen::VectorXd& x, const Eigen::VectorXd& at) const;

    double penalized(const Eigen::VectorXd& x, double phi) const;
    cvx::Program build(const Eigen::VectorXd& at, double phi) const;

    /// Smallest pair secrecy over all pairs at x.
    double min_pair(const Eigen::VectorXd& x) const;
    /// Typical secrecy contribution of one transmission to a pair average.
    double cell_scale() const;

private:
    struct Term {
        std::vector<int> vars;       // jamming-power variables of co-channel jammers
        std::vector<double> user;    // their normalized gains to the user
        std::vector<std::vector<double>> eve;  // per eve
        double signal = 0.0;         // p h / sigma^2 at the user
        std::vector<double> leak;    // p h / sigma^2 at each eve
        int user_index = 0;
    };
    double affine(const Term& t, const std::vector<double>& g, const Eigen::VectorXd& x) const;

    const AllocationState& comm_;
    const Scenario& s_;
    double zeta_;
    int users_, eves_;
    std::vector<JamCell> cells_;
    std::vector<Term> terms_;
};

struct JamOptions {
    double zeta = 0.1;        // weight of the mean pair secrecy next to eta
    double phi_scale = 0.1;   // initial phi relative to cell_scale()
    double phi_growth = 2.0;
    int max_rounds = 10;
    int max_sca = 20;
    double tol = 1e-6;        // relative change of the penalized objective
    double binary_tol = 1e-3; // max s (1 - s) accepted as binary
    std::vector<bool> can_jam;  // empty means all
    cvx::Options solver = {1e-8, 400, 1e-3, 10.0, 64};
};

struct JamTracePoint {
    int round = 0;
    double phi = 0.0;
    double penalized = 0.0;   // true penalized objective at the iterate
    double binariness = 0.0;  // max s (1 - s)
};

struct JamResult {
    AllocationState state;  // communication copied from the input
    double eta = 0.0;       // oracle objective of `state`
    bool accepted = false;  // false when the incoming policy was kept
    bool solver_failed = false;
    double binariness = 0.0;  // max s (1 - s) of the last relaxed iterate
    std::vector<JamTracePoint> trace;
};

/// Jamming schedule and power for fixed communication and trajectories.
/// Never returns an oracle objective below that of `state_in`.
JamResult solve_jam(const AllocationState& state_in, const TrajectorySet& traj, const Scenario& s,
                    const JamOptions& opts = {});

}  // namespace uavsec
