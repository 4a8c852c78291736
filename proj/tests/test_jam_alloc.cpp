#include "fixtures.hpp"

#include "uavsec/comm_alloc.hpp"
#include "uavsec/jam_alloc.hpp"
#include "uavsec/rates.hpp"

#include <doctest.h>

#include <random>
#include <vector>

using namespace uavsec;
using namespace uavsec::testing;

namespace {

/// Two UAVs 200 m apart, a user between them and an eve next to the user:
/// UAV 0 serves the user, UAV 1 is free to jam.
struct Duo {
    Scenario s = bare_scenario(1, 1);
    TrajectorySet t;
    AllocationState st;
    Duo(Vec2 eve = Vec2(20, 0)) {
        s.uavs = {{Vec2(-100, 0), Vec2(-100, 0), 1.0}, {Vec2(100, 0), Vec2(100, 0), 1.0}};
        s.users = {Vec2(0, 0)};
        s.eves = {eve};
        t = parked(s);
        st = AllocationState::zeros(s);
        st.sched(0, 0, 0, 0) = 1;
        st.power(0, 0, 0, 0) = 1.0;
    }
};

void check_policy(const AllocationState& st, const Scenario& s) {
    for (int n = 0; n < s.num_slots; ++n) {
        for (int m = 0; m < s.num_uavs(); ++m) {
            for (int i = 0; i < s.num_subcarriers; ++i) {
                const double j = st.jam_sched(n, m, i);
                REQUIRE((j == 0.0 || j == 1.0));
                double on = j;
                for (int k = 0; k < s.num_users(); ++k) on += st.sched(n, m, k, i);
                REQUIRE(on <= 1.0);
                REQUIRE(st.jam_power(n, m, i) >= 0.0);
            }
            REQUIRE(st.total_power(n, m) <= s.uavs[m].peak_power * (1 + 1e-9));
        }
    }
}

}  // namespace

TEST_CASE("residual budget") {
    Duo d;
    d.st.power(0, 0, 0, 0) = 0.7;
    const auto b = residual_budget(d.st, d.s);
    CHECK(b[0] == doctest::Approx(0.3));
    CHECK(b[1] == 1.0);
    d.st.power(0, 0, 0, 0) = 1.5;
    CHECK(residual_budget(d.st, d.s)[0] == 0.0);
}

TEST_CASE("candidate cells") {
    Duo d;
    const JamSurrogate sur(d.st, d.t, d.s, 0.1);
    REQUIRE(sur.cells().size() == 1);
    CHECK(sur.cells()[0].m == 1);
    CHECK(sur.cells()[0].budget == 1.0);
    CHECK(JamSurrogate(d.st, d.t, d.s, 0.1, {true, false}).cells().empty());

    AllocationState none = AllocationState::zeros(d.s);
    CHECK(JamSurrogate(none, d.t, d.s, 0.1).cells().empty());
    const JamResult r = solve_jam(none, d.t, d.s);
    CHECK(r.eta == 0.0);
    CHECK_FALSE(r.accepted);
}

TEST_CASE("surrogate is a tight lower bound") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    Duo d;
    const JamSurrogate sur(d.st, d.t, d.s, 0.1);
    for (int t = 0; t < 200; ++t) {
        Eigen::VectorXd at(3), x(3);
        at << 0, 1, 0.01 + u(rng);
        x << 0, 1, u(rng);
        const auto exact = sur.pair_secrecy(x);
        CHECK(sur.pair_lower_bound(at, at)[0] == doctest::Approx(sur.pair_secrecy(at)[0]));
        CHECK(sur.pair_lower_bound(x, at)[0] <= exact[0] + 1e-12);
        // first-order agreement
        const double h = 1e-7;
        Eigen::VectorXd xp = at, xm = at;
        xp[2] += h;
        xm[2] -= h;
        const double fd_exact = (sur.pair_secrecy(xp)[0] - sur.pair_secrecy(xm)[0]) / (2 * h);
        const double fd_bound =
            (sur.pair_lower_bound(xp, at)[0] - sur.pair_lower_bound(xm, at)[0]) / (2 * h);
        CHECK(fd_bound == doctest::Approx(fd_exact).epsilon(1e-3));
    }
}

TEST_CASE("penalty term") {
    Duo d;
    const JamSurrogate sur(d.st, d.t, d.s, 0.0);
    Eigen::VectorXd x(3);
    x << 0.2, 0.5, 0.3;
    CHECK(sur.penalized(x, 2.0) == doctest::Approx(0.2 - 2.0 * 0.25));
    x[1] = 1.0;
    CHECK(sur.penalized(x, 2.0) == doctest::Approx(0.2));
}

TEST_CASE("jamming matches brute force on a one-cell instance") {
    Duo d;
    double best = 0.0;
    for (int j = 0; j <= 1000; ++j) {
        AllocationState b = d.st;
        b.jam_sched(0, 1, 0) = j > 0;
        b.jam_power(0, 1, 0) = j * 1e-3;
        best = std::max(best, objective(b, d.t, d.s));
    }
    const double before = objective(d.st, d.t, d.s);
    REQUIRE(best > before);
    const JamResult r = solve_jam(d.st, d.t, d.s);
    CHECK(r.accepted);
    CHECK_FALSE(r.solver_failed);
    CHECK(r.eta >= 0.98 * best);
    CHECK(r.eta <= best * 1.001);  // grid resolution
    CHECK(r.eta == doctest::Approx(objective(r.state, d.t, d.s)));
    CHECK(r.state.sched(0, 0, 0, 0) == 1.0);
    check_policy(r.state, d.s);

    // penalized objective never drops inside a round
    for (std::size_t j = 1; j < r.trace.size(); ++j) {
        if (r.trace[j].round != r.trace[j - 1].round) continue;
        const double p = r.trace[j - 1].penalized;
        CHECK(r.trace[j].penalized >= p - 1e-6 * (1 + std::abs(p)));
    }
}

TEST_CASE("jamming that hurts the user is rejected") {
    // eve on the far side of the user from the jammer: equal jamming reach
    // needs the eve mirrored, so put both at the same distance from UAV 1
    Duo d(Vec2(0, 60));
    d.s.users = {Vec2(0, -60)};
    d.s.uavs[0] = {Vec2(-100, -60), Vec2(-100, -60), 1.0};
    d.s.uavs[1] = {Vec2(100, 0), Vec2(100, 0), 1.0};
    d.t = parked(d.s);
    const double before = objective(d.st, d.t, d.s);
    REQUIRE(before > 0.0);
    const JamResult r = solve_jam(d.st, d.t, d.s);
    CHECK_FALSE(r.accepted);
    CHECK(r.eta == before);
    CHECK(r.state == d.st);
}

TEST_CASE("random multi-uav instances") {
    std::mt19937 rng(23);
    int improved = 0;
    for (int t = 0; t < 8; ++t) {
        // users near UAV 0, eves between the two UAVs
        Scenario s = random_single(rng, 2, 2, 2, 4);
        std::uniform_real_distribution<double> near(-40.0, 40.0);
        s.uavs[1] = {Vec2(150, 0), Vec2(150, 0), 1.0};
        for (auto& u : s.users) u = Vec2(near(rng), near(rng));
        for (auto& e : s.eves) e = Vec2(near(rng) + 80, near(rng));
        const TrajectorySet traj = parked(s);
        CommOptions co;
        co.can_communicate = {true, t % 2 == 0};
        const CommResult c = solve_comm(AllocationState::zeros(s), traj, s, co);
        const JamResult r = solve_jam(c.state, traj, s);
        CHECK(r.eta >= c.eta);
        CHECK(r.eta == doctest::Approx(objective(r.state, traj, s)));
        check_policy(r.state, s);
        for (int n = 0; n < s.num_slots; ++n)
            for (int m = 0; m < 2; ++m)
                for (int k = 0; k < 2; ++k)
                    for (int i = 0; i < 4; ++i)
                        CHECK(r.state.comm_tx(n, m, k, i) == c.state.comm_tx(n, m, k, i));
        improved += r.accepted;

        JamOptions only_first;
        only_first.can_jam = {true, false};
        const JamResult r1 = solve_jam(c.state, traj, s, only_first);
        for (int i = 0; i < 4; ++i) CHECK(r1.state.jam_sched(0, 1, i) == 0.0);
    }
    CHECK(improved > 0);
}
