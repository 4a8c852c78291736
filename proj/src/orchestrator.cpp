#include "uavsec/orchestrator.hpp"

#include <chrono>
#include <cmath>

namespace uavsec {

std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::pa: return "pa";
        case Scheme::nj: return "nj";
        case Scheme::sp: return "sp";
    }
    return "?";
}

Scheme parse_scheme(const std::string& name) {
    if (name == "pa") return Scheme::pa;
    if (name == "nj") return Scheme::nj;
    if (name == "sp") return Scheme::sp;
    throw std::invalid_argument("unknown scheme: " + name);
}

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool geometry_ok(const ConstraintReport& r) {
    for (const char* name : {"speed", "nfz", "separation", "start", "end"}) {
        if (!r.get(name).pass) return false;
    }
    return true;
}

}  // namespace

SolveReport solve(const Scenario& s, Scheme scheme, const SolveOptions& opts) {
    const auto t_start = Clock::now();
    const ValidationReport v = validate(s);
    if (!v.feasible()) {
        std::string why = v.reachable ? "" : "end point not reachable in time";
        for (const auto& x : v.violations) why += (why.empty() ? "" : "; ") + x;
        throw InfeasibleScenario("infeasible scenario: " + why);
    }
    if (scheme == Scheme::sp && s.num_uavs() != 2) {
        throw UnsupportedConfiguration("sp needs exactly two UAVs");
    }

    CommOptions comm_opts = opts.comm;
    JamOptions jam_opts = opts.jam;
    TrajOptions traj_opts = opts.traj;
    traj_opts.record_iterates = opts.record_traj_iterates;
    if (scheme == Scheme::sp) {
        comm_opts.can_communicate = {false, true};
        jam_opts.can_jam = {true, false};
    }

    SolveReport rep;
    rep.scheme = scheme;
    rep.traj = initial_trajectory(s);
    rep.state = AllocationState::zeros(s);
    if (!geometry_ok(check_constraints(rep.state, rep.traj, s, 1e-6))) {
        throw InfeasibleScenario("infeasible scenario: no feasible initial trajectory");
    }

    // a user no UAV can serve securely along the straight paths gets no
    // trajectory gradient at all; fly-hover-fly starts break that deadlock
    if (opts.visit_starts) {
        auto total = [](const std::vector<double>& v) {
            double t = 0.0;
            for (double x : v) t += x;
            return t;
        };
        const CommResult base = solve_comm(rep.state, rep.traj, s, comm_opts);
        double best = base.eta, best_total = total(per_user_secrecy(base.state, LinkGains(rep.traj, s), s));
        const TrajectorySet line = rep.traj;
        for (int m = 0; m < s.num_uavs(); ++m) {
            if (!comm_opts.can_communicate.empty() && !comm_opts.can_communicate[m]) continue;
            for (int k = 0; k < s.num_users(); ++k) {
                const auto cand = visit_trajectory(line, m, s.users[k], s);
                if (!cand) continue;
                const CommResult c = solve_comm(rep.state, *cand, s, comm_opts);
                const double t = total(per_user_secrecy(c.state, LinkGains(*cand, s), s));
                if (c.eta > best || (c.eta == best && t > best_total)) {
                    best = c.eta;
                    best_total = t;
                    rep.traj = *cand;
                    rep.start = "visit uav" + std::to_string(m) + " user" + std::to_string(k);
                }
            }
        }
    }
    if (opts.record_traj_iterates) rep.traj_iterates.push_back(rep.traj);

    double eta = objective(rep.state, rep.traj, s);
    const DualState* warm = nullptr;
    DualState dual;
    int calm = 0;
    for (int l = 1; l <= opts.max_iter; ++l) {
        IterationRecord rec;
        rec.iteration = l;
        const double before = eta;

        auto t0 = Clock::now();
        CommResult c = solve_comm(rep.state, rep.traj, s, comm_opts, warm);
        if (scheme != Scheme::nj) {
            // jammed cells are closed to communication; also try reopening
            // them so that early jamming cannot lock the schedule in
            AllocationState open = rep.state;
            open.clear_jamming();
            CommResult reopened = solve_comm(open, rep.traj, s, comm_opts, warm);
            if (reopened.eta > c.eta) c = std::move(reopened);
        }
        rec.comm.seconds = since(t0);
        rec.comm.eta = c.eta;
        dual = c.dual;
        warm = &dual;
        if (c.eta >= eta - opts.accept_drop) {
            rep.state = c.state;
            eta = c.eta;
            rec.comm.accepted = true;
        }

        if (scheme == Scheme::nj) {
            rec.jam.skipped = true;
            rec.jam.eta = eta;
        } else {
            t0 = Clock::now();
            const JamResult j = solve_jam(rep.state, rep.traj, s, jam_opts);
            rec.jam.seconds = since(t0);
            rec.jam.eta = j.eta;
            rec.jam.failed = j.solver_failed;
            if (j.accepted && j.eta >= eta - opts.accept_drop) {
                rep.state = j.state;
                eta = j.eta;
                rec.jam.accepted = true;
            }
        }

        t0 = Clock::now();
        const TrajResult t = solve_traj(rep.state, rep.traj, s, traj_opts);
        rec.traj.seconds = since(t0);
        rec.traj.eta = t.eta;
        rec.traj.failed = t.solver_failed;
        if (opts.record_traj_iterates) {
            rep.traj_iterates.insert(rep.traj_iterates.end(), t.iterates.begin(), t.iterates.end());
        }
        if (t.accepted && t.eta >= eta - opts.accept_drop) {
            rep.traj = t.traj;
            eta = t.eta;
            rec.traj.accepted = true;
        }

        rep.any_failure |= rec.jam.failed || rec.traj.failed;
        rep.iterations.push_back(rec);
        rep.eta_trace.push_back(eta);
        const double change = std::abs(eta - before) / std::max(std::abs(before), 1e-12);
        calm = change < opts.tol ? calm + 1 : 0;
        if (calm >= 2) {
            rep.converged = true;
            break;
        }
    }

    rep.eta = objective(rep.state, rep.traj, s);
    rep.per_user = per_user_secrecy(rep.state, LinkGains(rep.traj, s), s);
    rep.constraints = check_constraints(rep.state, rep.traj, s, 1e-6);
    rep.seconds = since(t_start);
    return rep;
}

}  // namespace uavsec
