#include "fixtures.hpp"

#include "uavsec/comm_alloc.hpp"
#include "uavsec/rates.hpp"
#include "uavsec/traj_opt.hpp"

#include <doctest.h>

#include <random>
#include <vector>

using namespace uavsec;
using namespace uavsec::testing;

namespace {

void check_geometry(const TrajectorySet& t, const AllocationState& st, const Scenario& s) {
    const ConstraintReport r = check_constraints(st, t, s, 1e-6);
    for (const char* name : {"speed", "nfz", "separation", "start", "end"}) {
        INFO(name);
        CHECK(r.get(name).pass);
    }
}

/// One UAV flying (0,0) -> (60,0) in three slots and one user; without
/// eavesdroppers the secrecy rate is the plain rate.
struct Hover {
    Scenario s = bare_scenario(3, 1);
    AllocationState st;
    Hover() {
        s.max_speed = 30.0;
        s.uavs = {{Vec2(0, 0), Vec2(60, 0), 1.0}};
        s.users = {Vec2(30, 0)};
        st = AllocationState::zeros(s);
        for (int n = 0; n < 3; ++n) {
            st.sched(n, 0, 0, 0) = 1;
            st.power(n, 0, 0, 0) = 1.0;
        }
    }
};

}  // namespace

TEST_CASE("no-fly half-plane") {
    const NoFlyZone z{Vec2(150, 325), 60.0, 150.0};
    const HalfPlane h = nfz_half_plane(Vec2(90, 325), z);
    CHECK(h.slack(Vec2(90, 0)) == doctest::Approx(0.0));
    CHECK(h.slack(Vec2(91, 325)) < 0.0);
    CHECK(h.slack(Vec2(89, 500)) > 0.0);
    CHECK(h.normal.y() == 0.0);  // x <= 90

    const HalfPlane top = nfz_half_plane(Vec2(150, 385), z);
    CHECK(top.slack(Vec2(150, 385)) == doctest::Approx(0.0));
    CHECK(top.slack(Vec2(0, 385)) == doctest::Approx(0.0));
    CHECK_THROWS(nfz_half_plane(Vec2(150, 325), z));

    // inner approximation: the half-plane never reaches into the disk
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int t = 0; t < 1000; ++t) {
        const Vec2 q0 = z.center + (70 + 100 * std::abs(u(rng))) * Vec2(u(rng), u(rng)).normalized();
        const Vec2 q = z.center + 60 * std::abs(u(rng)) * Vec2(u(rng), u(rng)).normalized();
        CHECK(nfz_half_plane(q0, z).slack(q) < 1e-9);
    }
}

TEST_CASE("separation half-plane") {
    const HalfPlane h = separation_half_plane(Vec2(50, 0), Vec2(0, 0), 50.0);
    CHECK(h.slack(Vec2(50, 0)) == doctest::Approx(0.0));
    CHECK(h.slack(Vec2(49, 30)) < 0.0);
    CHECK_THROWS(separation_half_plane(Vec2(1, 1), Vec2(1, 1), 50.0));
}

TEST_CASE("slack initialization") {
    Scenario s = bare_scenario(2, 1);
    s.uavs = {{Vec2(0, 0), Vec2(0, 0), 1.0}};
    s.users = {Vec2(0, 0)};
    s.eves = {Vec2(30, 40)};
    const TrajIterate it = init_slacks(parked(s), s);
    CHECK(it.t(0, 0, 0) == 1e4);
    CHECK(it.t_lb(0, 0, 0) == 1e4);
    CHECK(it.t(1, 0, 1) == doctest::Approx(1e4 + 2500));
    s.nfzs = {{Vec2(10, 0), 20.0, 150.0}};
    CHECK_THROWS(init_slacks(parked(s), s));
}

TEST_CASE("initial trajectory detours around a blocking zone") {
    Scenario s = bare_scenario(30, 1);
    s.uavs = {{Vec2(0, 0), Vec2(300, 0), 1.0}};
    s.nfzs = {{Vec2(150, 10), 60.0, 150.0}};
    s.users = {Vec2(150, -120)};
    s.eves = {Vec2(0, 200)};
    const TrajectorySet t = initial_trajectory(s);
    check_geometry(t, AllocationState::zeros(s), s);
    double closest = 1e9;
    for (int w = 0; w <= 30; ++w) closest = std::min(closest, (t.q(0, w) - s.nfzs[0].center).norm());
    CHECK(closest >= 60.0);
    CHECK(closest < 62.0);  // hugs the zone

    // waypoints equally spaced along the route
    for (int w = 2; w <= 30; ++w) {
        CHECK((t.q(0, w) - t.q(0, w - 1)).norm() <= 20.0);
    }

    const TrajectorySet d = initial_trajectory(default_scenario());
    check_geometry(d, AllocationState::zeros(default_scenario()), default_scenario());
}

TEST_CASE("initial trajectory keeps two crossing UAVs apart") {
    Scenario s = bare_scenario(20, 1);
    s.uavs = {{Vec2(0, 0), Vec2(200, 0), 1.0}, {Vec2(100, -100), Vec2(100, 100), 1.0}};
    s.users = {Vec2(0, 0)};
    const TrajectorySet t = initial_trajectory(s);
    for (int w = 0; w <= 20; ++w) CHECK((t.q(0, w) - t.q(1, w)).norm() >= 50.0 - 1e-9);
}

TEST_CASE("surrogate is tight and below the exact secrecy") {
    const Scenario s = default_scenario();
    const TrajectorySet t = initial_trajectory(s);
    const CommResult c = solve_comm(AllocationState::zeros(s), t, s);
    AllocationState st = c.state;
    // jammer on every subcarrier the other UAV uses in the first slots
    for (int n = 0; n < 10; ++n) {
        for (int i = 0; i < s.num_subcarriers; ++i) {
            if (st.comm_tx(n, 0, 0, i) + st.comm_tx(n, 0, 1, i) > 0.0 &&
                st.comm_tx(n, 1, 0, i) + st.comm_tx(n, 1, 1, i) == 0.0) {
                st.jam_sched(n, 1, i) = 1;
                st.jam_power(n, 1, i) = 0.01;
            }
        }
    }
    const TrajSurrogate sur(st, s);
    const TrajIterate it = init_slacks(t, s);
    const auto exact = sur.pair_secrecy(t);
    const auto lb = sur.pair_lower_bound(t, it);
    for (std::size_t j = 0; j < exact.size(); ++j) CHECK(lb[j] == doctest::Approx(exact[j]).epsilon(1e-10));

    // pair form agrees with the rates module
    const LinkGains g(t, s);
    for (int k = 0; k < s.num_users(); ++k) {
        for (int e = 0; e < s.num_eves(); ++e) {
            CHECK(exact[k * s.num_eves() + e] == doctest::Approx(uavsec::pair_secrecy(k, e, st, g, s)));
        }
    }

    std::mt19937 rng(9);
    std::uniform_real_distribution<double> u(-15, 15);
    for (int trial = 0; trial < 20; ++trial) {
        TrajectorySet q = t;
        for (int m = 0; m < 2; ++m)
            for (int w = 1; w < s.num_slots; ++w) q.q(m, w) += Vec2(u(rng), u(rng));
        const auto e2 = sur.pair_secrecy(q);
        const auto l2 = sur.pair_lower_bound(q, it);
        for (std::size_t j = 0; j < e2.size(); ++j) CHECK(l2[j] <= e2[j] + 1e-12);
    }

    // matching first derivatives at the expansion point
    for (int w : {3, 20, 45}) {
        for (int d = 0; d < 2; ++d) {
            const double h = 1e-4;
            TrajectorySet p = t, m = t;
            p.paths[0](d, w) += h;
            m.paths[0](d, w) -= h;
            const auto ep = sur.pair_secrecy(p), em = sur.pair_secrecy(m);
            const auto lp = sur.pair_lower_bound(p, it), lm = sur.pair_lower_bound(m, it);
            for (std::size_t j = 0; j < ep.size(); ++j) {
                const double fe = (ep[j] - em[j]) / (2 * h), fl = (lp[j] - lm[j]) / (2 * h);
                CHECK(fl == doctest::Approx(fe).epsilon(1e-4).scale(1e-6));
            }
        }
    }
}

TEST_CASE("zero allocation leaves the trajectory alone") {
    const Scenario s = default_scenario();
    const TrajectorySet t = initial_trajectory(s);
    const TrajResult r = solve_traj(AllocationState::zeros(s), t, s);
    CHECK_FALSE(r.accepted);
    CHECK(r.eta == 0.0);
    CHECK(r.traj.paths[0] == t.paths[0]);
}

TEST_CASE("hovering over a user matches a waypoint grid") {
    Hover h;
    TrajectorySet line;
    Eigen::Matrix2Xd p(2, 4);
    p << 0, 20, 40, 60, 0, 0, 0, 0;
    line.paths = {p};
    const double before = objective(h.st, line, h.s);
    const TrajResult r = solve_traj(h.st, line, h.s);
    CHECK(r.accepted);
    CHECK(r.eta > before);
    check_geometry(r.traj, h.st, h.s);

    double best = 0.0;
    TrajectorySet g = line;
    for (int a = 0; a <= 24; ++a) {
        for (int b = -12; b <= 12; ++b) {
            g.q(0, 1) = Vec2(2.5 * a, 2.5 * b);
            if (g.q(0, 1).norm() > 30.0) continue;
            for (int c = 0; c <= 24; ++c) {
                for (int d = -12; d <= 12; ++d) {
                    g.q(0, 2) = Vec2(2.5 * c, 2.5 * d);
                    if ((g.q(0, 2) - g.q(0, 1)).norm() > 30.0 || (g.q(0, 3) - g.q(0, 2)).norm() > 30.0) {
                        continue;
                    }
                    best = std::max(best, objective(h.st, g, h.s));
                }
            }
        }
    }
    CHECK(r.eta >= best - 1e-9);
    CHECK(r.eta <= best * 1.01);
    // both free waypoints sit on top of the user
    CHECK((r.traj.q(0, 1) - Vec2(30, 0)).norm() < 0.1);
    CHECK((r.traj.q(0, 2) - Vec2(30, 0)).norm() < 0.1);
}

TEST_CASE("every iterate stays feasible") {
    Scenario s = default_scenario();
    s.num_subcarriers = 4;
    const TrajectorySet t = initial_trajectory(s);
    const CommResult c = solve_comm(AllocationState::zeros(s), t, s);
    TrajOptions o;
    o.record_iterates = true;
    const TrajResult r = solve_traj(c.state, t, s, o);
    CHECK_FALSE(r.solver_failed);
    CHECK(r.accepted);
    CHECK(r.eta > c.eta);
    REQUIRE(!r.iterates.empty());
    for (const auto& q : r.iterates) check_geometry(q, c.state, s);
    for (std::size_t j = 1; j < r.surrogate_trace.size(); ++j) {
        CHECK(r.surrogate_trace[j] >= r.surrogate_trace[j - 1] - 1e-6);
    }

    // a zone dropped across the first UAV's route
    s.nfzs.push_back({Vec2(250, 20), 60.0, 150.0});
    const TrajectorySet d = initial_trajectory(s);
    const CommResult c2 = solve_comm(AllocationState::zeros(s), d, s);
    const TrajResult r2 = solve_traj(c2.state, d, s, o);
    for (const auto& q : r2.iterates) check_geometry(q, c2.state, s);
    for (int w = 0; w <= s.num_slots; ++w) CHECK((r2.traj.q(0, w) - Vec2(250, 20)).norm() >= 60 - 1e-6);
}

TEST_CASE("visit trajectories hover at the target or as close as time allows") {
    const Scenario s = default_scenario();
    const TrajectorySet line = initial_trajectory(s);
    const auto near = visit_trajectory(line, 0, s.users[0], s);
    REQUIRE(near);
    check_geometry(*near, AllocationState::zeros(s), s);
    CHECK(near->paths[1] == line.paths[1]);
    double closest = 1e9;
    for (int w = 0; w <= s.num_slots; ++w) closest = std::min(closest, (near->q(0, w) - s.users[0]).norm());
    CHECK(closest < 1e-9);

    // the far corner is out of reach in 45 s: the hover point is pulled back
    const Scenario short_s = with_mission_time(s, 45.0);
    const auto far = visit_trajectory(initial_trajectory(short_s), 1, s.users[0], short_s);
    REQUIRE(far);
    check_geometry(*far, AllocationState::zeros(short_s), short_s);
    double gap = 1e9;
    for (int w = 0; w <= short_s.num_slots; ++w) gap = std::min(gap, (far->q(1, w) - s.users[0]).norm());
    CHECK(gap > 1.0);
}
