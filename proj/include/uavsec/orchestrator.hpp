#pragma once

#include "uavsec/allocation.hpp"
#include "uavsec/comm_alloc.hpp"
#include "uavsec/jam_alloc.hpp"
#include "uavsec/rates.hpp"
#include "uavsec/scenario.hpp"
#include "uavsec/traj_opt.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace uavsec {

/// PA: proposed multi-purpose UAVs. NJ: no jamming. SP: fixed roles, UAV 1
/// jams and UAV 2 communicates.
enum class Scheme { pa, nj, sp };

std::string to_string(Scheme s);
/// Throws std::invalid_argument on an unknown name.
Scheme parse_scheme(const std::string& name);

class InfeasibleScenario : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnsupportedConfiguration : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SolveOptions {
    double tol = 1e-4;  // relative eta change, twice in a row
    int max_iter = 30;
    double accept_drop = 1e-9;  // largest oracle drop a block update may cause
    bool record_traj_iterates = false;
    bool visit_starts = true;  // also try fly-hover-fly starts toward each user
    CommOptions comm;
    JamOptions jam;
    TrajOptions traj;
};

/// One block update inside an outer iteration.
struct BlockRecord {
    double eta = 0.0;  // oracle value after the block (accepted or not)
    double seconds = 0.0;
    bool accepted = false;
    bool failed = false;
    bool skipped = false;
};

struct IterationRecord {
    int iteration = 0;
    BlockRecord comm, jam, traj;
};

struct SolveReport {
    Scheme scheme = Scheme::pa;
    std::vector<double> eta_trace;  // oracle eta after every outer iteration
    std::vector<IterationRecord> iterations;
    AllocationState state;
    TrajectorySet traj;
    double eta = 0.0;
    std::vector<double> per_user;
    bool converged = false;
    bool any_failure = false;
    ConstraintReport constraints;
    std::string start = "line";  // initial trajectory: "line" or "visit uav<m> user<k>"
    std::vector<TrajectorySet> traj_iterates;  // when recorded
    double seconds = 0.0;
};

/// Alternates communication, jamming and trajectory updates. Throws
/// InfeasibleScenario when the instance fails validation or no feasible
/// initial trajectory exists, and UnsupportedConfiguration for SP with
/// M != 2.
SolveReport solve(const Scenario& s, Scheme scheme, const SolveOptions& opts = {});

inline SolveReport solve_pa(const Scenario& s, const SolveOptions& o = {}) { return solve(s, Scheme::pa, o); }
inline SolveReport solve_nj(const Scenario& s, const SolveOptions& o = {}) { return solve(s, Scheme::nj, o); }
inline SolveReport solve_sp(const Scenario& s, const SolveOptions& o = {}) { return solve(s, Scheme::sp, o); }

}  // namespace uavsec
