#pragma once

#include "uavsec/allocation.hpp"
#include "uavsec/rates.hpp"
#include "uavsec/scenario.hpp"

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace uavsec {

/// Lagrange multipliers of the communication subproblem.
///
/// alpha weights the per-(user, eve) secrecy constraints and is kept on the
/// unit simplex (the Lagrangian is bounded in eta only when the weights sum
/// to a constant). With no eavesdroppers there is one pseudo-eve of zero gain
/// per user.
struct DualState {
    int users = 0, eves = 0, slots = 0, uavs = 0, subcarriers = 0;
    std::vector<double> alpha;  // users x eves
    std::vector<double> beta;   // slots x subcarriers
    std::vector<double> eps;    // slots x uavs x subcarriers
    std::vector<double> theta;  // slots x uavs

    static DualState initial(const Scenario& s);

    double& a(int k, int e) { return alpha[k * eves + e]; }
    double a(int k, int e) const { return alpha[k * eves + e]; }
    double& b(int n, int i) { return beta[n * subcarriers + i]; }
    double b(int n, int i) const { return beta[n * subcarriers + i]; }
    double& ep(int n, int m, int i) { return eps[(n * uavs + m) * subcarriers + i]; }
    double ep(int n, int m, int i) const { return eps[(n * uavs + m) * subcarriers + i]; }
    double& th(int n, int m) { return theta[n * uavs + m]; }
    double th(int n, int m) const { return theta[n * uavs + m]; }
    std::span<const double> alpha_row(int k) const {
        return {alpha.data() + static_cast<std::size_t>(k) * eves, static_cast<std::size_t>(eves)};
    }
};

/// Gain-to-interference-plus-noise ratios under a fixed jamming policy, 1/W.
class EffectiveGains {
public:
    EffectiveGains(const AllocationState& jam, const LinkGains& g, const Scenario& s);

    double comm(int n, int m, int k, int i) const { return comm_[idx_u(n, m, k, i)]; }
    double eve(int n, int m, int e, int i) const { return eve_[idx_e(n, m, e, i)]; }
    /// Eve gains of (n, m, i), one per (pseudo-)eve.
    std::span<const double> eves(int n, int m, int i) const {
        return {eve_.data() + idx_e(n, m, 0, i), static_cast<std::size_t>(eves_)};
    }
    int num_eves() const { return eves_; }

private:
    std::size_t idx_u(int n, int m, int k, int i) const {
        return ((static_cast<std::size_t>(n) * uavs_ + m) * users_ + k) * subcarriers_ + i;
    }
    std::size_t idx_e(int n, int m, int e, int i) const {
        return ((static_cast<std::size_t>(n) * uavs_ + m) * subcarriers_ + i) * eves_ + e;
    }
    int uavs_, users_, eves_, subcarriers_;
    std::vector<double> comm_, eve_;
};

EffectiveGains effective_gains(const TrajectorySet& traj, const AllocationState& jam,
                               const Scenario& s);

/// Secrecy of a time-shared link in (x, y) = (schedule, s * p):
///   x log2(1 + k1 y / x) - x log2(1 + k2 y / x),
/// jointly concave for k1 > k2 >= 0. Zero at x = 0.
template <class T>
T secrecy_perspective(T x, T y, T k1, T k2) {
    using std::log2;
    if (x <= T(0)) return T(0);
    return x * (log2(T(1) + k1 * y / x) - log2(T(1) + k2 * y / x));
}

/// Maximizer over [0, p_cap] of
///   sum_e alpha_e [log2(1 + p H) - log2(1 + p H'_e)] - theta p.
/// Zero whenever H <= max_e H'_e. Closed form for a single active eve,
/// safeguarded Newton on the derivative otherwise.
double optimal_power(std::span<const double> alpha, double theta, double H,
                     std::span<const double> Heve, double p_cap);

/// Derivative of the Lagrangian with respect to the schedule indicator.
double scheduling_metric(std::span<const double> alpha, double beta, double eps, double p,
                         double H, std::span<const double> Heve);

/// Unique argmax (uav, user) of a uavs x users score table if its score is
/// positive; ties go to the lowest (uav, user) index.
std::optional<std::pair<int, int>> select_assignment(const Eigen::MatrixXd& scores);

struct CommOptions {
    int max_outer = 500;
    int max_inner = 50;
    double tol = 1e-4;  // relative dual-value change
    int patience = 5;   // consecutive outer iterations below tol
    std::array<double, 4> steps{0.5, 0.1, 0.1, 1e3};  // alpha, beta, eps, theta
    double theta_min = 1e-6;
    int polish_passes = 20;  // greedy subcarrier reassignment sweeps afterwards
    /// UAVs allowed to communicate; empty means all.
    std::vector<bool> can_communicate;
};

/// Projected subgradient step on every multiplier with steps delta_u / sqrt(l).
/// `surplus` holds the per-(user, eve) secrecy surplus over eta; alpha is
/// projected onto the nonnegative orthant and renormalized to the simplex.
DualState update_multipliers(const DualState& dual, const AllocationState& state,
                             const Scenario& s, const std::vector<double>& surplus, int l,
                             const CommOptions& opts);

struct CommResult {
    AllocationState state;  // jamming copied from the input, communication optimized
    double eta = 0.0;       // oracle objective of `state`
    DualState dual;
    int iterations = 0;
    bool converged = false;
};

/// Communication scheduling and power for fixed jamming and trajectories.
CommResult solve_comm(const AllocationState& jam, const TrajectorySet& traj, const Scenario& s,
                      const CommOptions& opts = {}, const DualState* warm = nullptr);

}  // namespace uavsec
