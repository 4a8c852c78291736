#pragma once

#include "uavsec/allocation.hpp"
#include "uavsec/scenario.hpp"

#include <string>
#include <vector>

namespace uavsec {

/// Channel power gains of every UAV-to-ground link in every slot.
class LinkGains {
public:
    LinkGains() = default;
    LinkGains(const TrajectorySet& traj, const Scenario& s);

    double user(int n, int m, int k) const { return user_[(n * uavs_ + m) * users_ + k]; }
    double eve(int n, int m, int e) const { return eve_[(n * uavs_ + m) * eves_ + e]; }

private:
    int uavs_ = 0, users_ = 0, eves_ = 0;
    std::vector<double> user_, eve_;
};

/// Co-channel jamming interference received by user k on subcarrier i when
/// UAV m is the transmitter.
double user_interference(int n, int m, int k, int i, const AllocationState& st,
                         const LinkGains& g);
double eve_interference(int n, int m, int e, int i, const AllocationState& st,
                        const LinkGains& g);

double sinr_user(int n, int m, int k, int i, const AllocationState& st, const LinkGains& g,
                 const Scenario& s);
double sinr_eve(int n, int m, int k, int e, int i, const AllocationState& st, const LinkGains& g,
                const Scenario& s);

/// s * log2(1 + SINR), bps/Hz.
double rate_user(int n, int m, int k, int i, const AllocationState& st, const LinkGains& g,
                 const Scenario& s);
double leakage_rate(int n, int m, int k, int e, int i, const AllocationState& st,
                    const LinkGains& g, const Scenario& s);

/// Unclipped R - max_e R' for one transmission.
double secrecy_term(int n, int m, int k, int i, const AllocationState& st, const LinkGains& g,
                    const Scenario& s);

/// Time-averaged clipped secrecy rate of user k against the worst
/// eavesdropper on each transmission.
double avg_secrecy_rate(int k, const AllocationState& st, const TrajectorySet& traj,
                        const Scenario& s);
double avg_secrecy_rate(int k, const AllocationState& st, const LinkGains& g, const Scenario& s);

std::vector<double> per_user_secrecy(const AllocationState& st, const LinkGains& g,
                                     const Scenario& s);

/// Average unclipped secrecy of user k against a single eavesdropper e
/// (the per-pair max-min constraint form).
double pair_secrecy(int k, int e, const AllocationState& st, const LinkGains& g,
                    const Scenario& s);

/// Switches off every transmission whose unclipped secrecy term is
/// negative (schedule and power zeroed). Other links are unaffected, so the
/// objective never drops and every constraint stays satisfied.
AllocationState clip_negative_terms(const AllocationState& st, const LinkGains& g, const Scenario& s);

/// min over users of avg_secrecy_rate: the reported objective eta.
double objective(const AllocationState& st, const TrajectorySet& traj, const Scenario& s);
double objective(const AllocationState& st, const LinkGains& g, const Scenario& s);

struct ConstraintCheck {
    std::string name;
    bool pass = true;
    double worst = 0.0;  // largest violation magnitude, 0 when satisfied
};

struct ConstraintReport {
    std::vector<ConstraintCheck> checks;

    bool all_pass() const;
    const ConstraintCheck& get(const std::string& name) const;
};

/// Checks C2-C11. Geometric tolerances are meters, power tolerances watts.
ConstraintReport check_constraints(const AllocationState& st, const TrajectorySet& traj,
                                   const Scenario& s, double tol);

}  // namespace uavsec
