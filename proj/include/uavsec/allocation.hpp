#pragma once

#include "uavsec/scenario.hpp"

#include <Eigen/Core>

#include <vector>

namespace uavsec {

/// Communication and jamming schedules and powers.
///
/// Slot indices are 0-based here: slot index n refers to model slot n + 1,
/// whose UAV positions are waypoint n + 1 of the TrajectorySet.
class AllocationState {
public:
    AllocationState() = default;
    AllocationState(int slots, int uavs, int users, int subcarriers)
        : slots_(slots), uavs_(uavs), users_(users), subcarriers_(subcarriers),
          sched_(comm_size(), 0.0), power_(comm_size(), 0.0),
          jam_sched_(jam_size(), 0.0), jam_power_(jam_size(), 0.0) {}

    static AllocationState zeros(const Scenario& s) {
        return {s.num_slots, s.num_uavs(), s.num_users(), s.num_subcarriers};
    }

    int slots() const { return slots_; }
    int uavs() const { return uavs_; }
    int users() const { return users_; }
    int subcarriers() const { return subcarriers_; }

    double& sched(int n, int m, int k, int i) { return sched_[comm_index(n, m, k, i)]; }
    double sched(int n, int m, int k, int i) const { return sched_[comm_index(n, m, k, i)]; }
    double& power(int n, int m, int k, int i) { return power_[comm_index(n, m, k, i)]; }
    double power(int n, int m, int k, int i) const { return power_[comm_index(n, m, k, i)]; }
    double& jam_sched(int n, int m, int i) { return jam_sched_[jam_index(n, m, i)]; }
    double jam_sched(int n, int m, int i) const { return jam_sched_[jam_index(n, m, i)]; }
    double& jam_power(int n, int m, int i) { return jam_power_[jam_index(n, m, i)]; }
    double jam_power(int n, int m, int i) const { return jam_power_[jam_index(n, m, i)]; }

    /// Effective transmitted communication power s * p.
    double comm_tx(int n, int m, int k, int i) const {
        return sched(n, m, k, i) * power(n, m, k, i);
    }
    /// Effective transmitted jamming power s^J * p^J.
    double jam_tx(int n, int m, int i) const { return jam_sched(n, m, i) * jam_power(n, m, i); }

    /// Total power radiated by UAV m in slot n.
    double total_power(int n, int m) const {
        double sum = 0.0;
        for (int i = 0; i < subcarriers_; ++i) {
            for (int k = 0; k < users_; ++k) sum += comm_tx(n, m, k, i);
            sum += jam_tx(n, m, i);
        }
        return sum;
    }

    /// Communication power of UAV m in slot n.
    double comm_power_used(int n, int m) const {
        double sum = 0.0;
        for (int i = 0; i < subcarriers_; ++i) {
            for (int k = 0; k < users_; ++k) sum += comm_tx(n, m, k, i);
        }
        return sum;
    }

    /// Drops every jamming decision, keeping communication.
    void clear_jamming() {
        std::fill(jam_sched_.begin(), jam_sched_.end(), 0.0);
        std::fill(jam_power_.begin(), jam_power_.end(), 0.0);
    }
    void clear_communication() {
        std::fill(sched_.begin(), sched_.end(), 0.0);
        std::fill(power_.begin(), power_.end(), 0.0);
    }

    const std::vector<double>& sched_data() const { return sched_; }
    const std::vector<double>& jam_sched_data() const { return jam_sched_; }

    bool operator==(const AllocationState&) const = default;

private:
    std::size_t comm_size() const {
        return static_cast<std::size_t>(slots_) * uavs_ * users_ * subcarriers_;
    }
    std::size_t jam_size() const { return static_cast<std::size_t>(slots_) * uavs_ * subcarriers_; }
    std::size_t comm_index(int n, int m, int k, int i) const {
        return ((static_cast<std::size_t>(n) * uavs_ + m) * users_ + k) * subcarriers_ + i;
    }
    std::size_t jam_index(int n, int m, int i) const {
        return (static_cast<std::size_t>(n) * uavs_ + m) * subcarriers_ + i;
    }

    int slots_ = 0, uavs_ = 0, users_ = 0, subcarriers_ = 0;
    std::vector<double> sched_, power_, jam_sched_, jam_power_;
};

/// Horizontal waypoints q_m[0..N] for every UAV.
struct TrajectorySet {
    std::vector<Eigen::Matrix2Xd> paths;

    int uavs() const { return static_cast<int>(paths.size()); }
    int waypoints() const { return paths.empty() ? 0 : static_cast<int>(paths.front().cols()); }

    auto q(int m, int n) { return paths[m].col(n); }
    auto q(int m, int n) const { return paths[m].col(n); }
    /// Position of UAV m during 0-based slot n.
    auto at_slot(int m, int n) const { return paths[m].col(n + 1); }
};

}  // namespace uavsec
