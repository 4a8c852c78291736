#include "uavsec/traj_opt.hpp"

#include "uavsec/channel.hpp"
#include "uavsec/rates.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace uavsec {

namespace {

constexpr double kLn2 = std::numbers::ln2;
constexpr double kPi = std::numbers::pi;

double wrap(double a) {
    a = std::fmod(a, 2.0 * kPi);
    return a < 0.0 ? a + 2.0 * kPi : a;
}

Vec2 polar(const Vec2& c, double r, double a) { return c + r * Vec2(std::cos(a), std::sin(a)); }

/// Polyline from a to b that keeps every vertex and edge outside the given
/// disks (centers inflated by 1 m), going around the nearest blocking disk on
/// its shorter side and recursing on the pieces.
std::vector<Vec2> route(const Vec2& a, const Vec2& b, const std::vector<NoFlyZone>& zones,
                        int depth) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    int hit = -1;
    double first = 2.0;
    double rho_hit = 0.0;
    for (std::size_t j = 0; j < zones.size(); ++j) {
        const Vec2& c = zones[j].center;
        const double clear = std::min((a - c).norm(), (b - c).norm());
        // stay strictly between the true radius and the endpoints
        const double rho = std::min(zones[j].radius + 1.0, 0.5 * (zones[j].radius + clear));
        const double t = len2 > 0.0 ? std::clamp((c - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
        if ((a + t * ab - c).norm() >= rho) continue;
        if (t < first) first = t, hit = static_cast<int>(j), rho_hit = rho;
    }
    if (hit < 0 || depth > 8) return {a, b};

    const Vec2& c = zones[hit].center;
    const double rho = rho_hit;
    const double da = (a - c).norm(), db = (b - c).norm();
    const double ba = std::atan2(a.y() - c.y(), a.x() - c.x());
    const double bb = std::atan2(b.y() - c.y(), b.x() - c.x());
    const double ea = std::acos(rho / da), eb = std::acos(rho / db);

    std::vector<Vec2> best;
    double best_len = INFINITY;
    for (int dir : {-1, 1}) {  // -1 clockwise, +1 counterclockwise
        const double ta = ba + dir * ea, tb = bb - dir * eb;
        const double sweep = dir > 0 ? wrap(tb - ta) : wrap(ta - tb);
        const double len = std::sqrt(da * da - rho * rho) + rho * sweep +
                           std::sqrt(db * db - rho * rho);
        if (len >= best_len) continue;
        const int pieces = std::max(1, static_cast<int>(std::ceil(sweep / (kPi / 18.0))));
        const double step = sweep / pieces;
        std::vector<Vec2> p = {a, polar(c, rho, ta)};
        for (int j = 0; j < pieces; ++j) {
            p.push_back(polar(c, rho / std::cos(step / 2.0), ta + dir * (j + 0.5) * step));
        }
        p.push_back(polar(c, rho, tb));
        p.push_back(b);
        best = std::move(p);
        best_len = len;
    }
    std::vector<Vec2> out = {a};
    for (std::size_t j = 0; j + 1 < best.size(); ++j) {
        const auto piece = route(best[j], best[j + 1], zones, depth + 1);
        out.insert(out.end(), piece.begin() + 1, piece.end());
    }
    return out;
}

Eigen::Matrix2Xd resample(const std::vector<Vec2>& poly, int slots) {
    std::vector<double> at(poly.size(), 0.0);
    for (std::size_t j = 1; j < poly.size(); ++j) at[j] = at[j - 1] + (poly[j] - poly[j - 1]).norm();
    Eigen::Matrix2Xd q(2, slots + 1);
    std::size_t seg = 1;
    for (int n = 0; n <= slots; ++n) {
        const double target = at.back() * n / slots;
        while (seg + 1 < poly.size() && at[seg] < target) ++seg;
        const double span = at[seg] - at[seg - 1];
        const double u = span > 0.0 ? std::clamp((target - at[seg - 1]) / span, 0.0, 1.0) : 0.0;
        q.col(n) = poly[seg - 1] + u * (poly[seg] - poly[seg - 1]);
    }
    q.col(0) = poly.front();
    q.col(slots) = poly.back();
    return q;
}

/// log(1 + sum_j c_j / y_j) and its partial derivatives.
double f_value(double signal, double ys, const std::vector<std::pair<double, double>>& jam,
               std::vector<double>* grad = nullptr) {
    double a = 1.0 + (signal > 0.0 ? signal / ys : 0.0);
    for (const auto& [c, y] : jam) a += c / y;
    if (grad) {
        grad->clear();
        grad->push_back(signal > 0.0 ? -signal / (ys * ys * a) : 0.0);
        for (const auto& [c, y] : jam) grad->push_back(-c / (y * y * a));
    }
    return std::log(a);
}

}  // namespace

HalfPlane nfz_half_plane(const Vec2& q0, const NoFlyZone& z) {
    const Vec2 u = q0 - z.center;
    if (u.squaredNorm() == 0.0) throw std::invalid_argument("nfz_half_plane: point at the center");
    // ||u||^2 + 2 u . (q - q0) >= r^2
    return {2.0 * u, z.radius * z.radius - u.squaredNorm() + 2.0 * u.dot(q0)};
}

HalfPlane separation_half_plane(const Vec2& a0, const Vec2& b0, double d) {
    const Vec2 u = a0 - b0;
    if (u.squaredNorm() == 0.0) throw std::invalid_argument("separation_half_plane: coincident points");
    // ||u||^2 + 2 u . (v - u) >= d^2 with v = q_a - q_b
    return {2.0 * u, d * d + u.squaredNorm()};
}

TrajectorySet initial_trajectory(const Scenario& s) {
    TrajectorySet t;
    for (const auto& u : s.uavs) t.paths.push_back(resample(route(u.start, u.end, s.nfzs, 0), s.num_slots));
    const double D = s.safety_distance;
    for (int m = 1; m < s.num_uavs(); ++m) {
        for (int n = 1; n < s.num_slots; ++n) {
            for (int o = 0; o < m; ++o) {
                const Vec2 gap = t.q(m, n) - t.q(o, n);
                if (gap.norm() >= D) continue;
                const Vec2 heading = t.q(m, n + 1) - t.q(m, n - 1);
                Vec2 side(-heading.y(), heading.x());
                if (side.norm() == 0.0) side = Vec2(1.0, 0.0);
                side.normalize();
                if (side.dot(gap) < 0.0) side = -side;
                t.q(m, n) += D * side;
            }
        }
    }
    return t;
}

namespace {

double length(const std::vector<Vec2>& poly) {
    double l = 0.0;
    for (std::size_t j = 1; j < poly.size(); ++j) l += (poly[j] - poly[j - 1]).norm();
    return l;
}

bool geometry_ok(const TrajectorySet& t, const Scenario& s, double tol);

}  // namespace

std::optional<TrajectorySet> visit_trajectory(const TrajectorySet& base, int m, const Vec2& target,
                                              const Scenario& s) {
    const Vec2 a = s.uavs[m].start, b = s.uavs[m].end;
    const Vec2 ab = b - a;
    const double t = ab.squaredNorm() > 0.0 ? std::clamp((target - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0) : 0.0;
    const Vec2 foot = a + t * ab;
    const double V = s.max_step() * (1.0 - 1e-9);
    const int N = s.num_slots;

    auto plan = [&](double lambda) -> std::optional<Eigen::Matrix2Xd> {
        const Vec2 p = target + lambda * (foot - target);
        for (const auto& z : s.nfzs) {
            if ((p - z.center).norm() <= z.radius + 1.0) return std::nullopt;
        }
        const auto out = route(a, p, s.nfzs, 0), back = route(p, b, s.nfzs, 0);
        const int k1 = static_cast<int>(std::ceil(length(out) / V));
        const int k2 = static_cast<int>(std::ceil(length(back) / V));
        if (k1 + k2 > N) return std::nullopt;
        Eigen::Matrix2Xd q(2, N + 1);
        if (k1 > 0) q.leftCols(k1 + 1) = resample(out, k1);
        for (int w = k1; w <= N - k2; ++w) q.col(w) = p;
        if (k2 > 0) q.rightCols(k2 + 1) = resample(back, k2);
        return q;
    };

    std::optional<Eigen::Matrix2Xd> q = plan(0.0);
    if (!q) {
        double lo = 0.0, hi = 1.0;  // plan(lo) fails, plan(hi) is tried last
        if (!plan(hi)) return std::nullopt;
        for (int it = 0; it < 40; ++it) {
            const double mid = 0.5 * (lo + hi);
            (plan(mid) ? hi : lo) = mid;
        }
        q = plan(hi);
    }
    TrajectorySet out = base;
    out.paths[m] = *q;
    if (!geometry_ok(out, s, 0.0)) return std::nullopt;
    return out;
}

TrajIterate init_slacks(const TrajectorySet& traj, const Scenario& s) {
    TrajIterate it;
    it.traj = traj;
    it.uavs = s.num_uavs();
    it.nodes = s.num_users() + s.num_eves();
    it.upper.assign(static_cast<std::size_t>(s.num_slots) * it.uavs * it.nodes, 0.0);
    for (int m = 0; m < it.uavs; ++m) {
        for (int w = 0; w <= s.num_slots; ++w) {
            for (const auto& z : s.nfzs) {
                if (inside_nfz(traj.q(m, w), z)) {
                    throw std::invalid_argument("init_slacks: waypoint inside a no-fly zone");
                }
            }
        }
    }
    for (int n = 0; n < s.num_slots; ++n) {
        for (int m = 0; m < it.uavs; ++m) {
            const Vec2 q = traj.at_slot(m, n);
            for (int k = 0; k < s.num_users(); ++k) {
                it.t(n, m, k) = link_distance_sq(q, s.users[k], s.altitude);
            }
            for (int e = 0; e < s.num_eves(); ++e) {
                it.t(n, m, s.num_users() + e) = link_distance_sq(q, s.eves[e], s.altitude);
            }
        }
    }
    it.lower = it.upper;
    return it;
}

TrajSurrogate::TrajSurrogate(const AllocationState& st, const Scenario& s)
    : s_(s), users_(s.num_users()), eves_(std::max(1, s.num_eves())) {
    const double g = s.ref_gain / s.noise_power;
    for (int n = 0; n < s.num_slots; ++n) {
        for (int m = 0; m < s.num_uavs(); ++m) {
            for (int k = 0; k < users_; ++k) {
                for (int i = 0; i < s.num_subcarriers; ++i) {
                    const double p = st.comm_tx(n, m, k, i);
                    if (p <= 0.0) continue;
                    Tx t{n, m, k, p * g, {}};
                    for (int o = 0; o < s.num_uavs(); ++o) {
                        if (o != m && st.jam_tx(n, o, i) > 0.0) t.jammers.emplace_back(o, st.jam_tx(n, o, i) * g);
                    }
                    txs_.push_back(std::move(t));
                }
            }
        }
    }
}

int TrajSurrogate::var(int m, int w, int d) const {
    if (w <= 0 || w >= s_.num_slots) return -1;
    return 1 + 2 * (m * (s_.num_slots - 1) + (w - 1)) + d;
}

Eigen::VectorXd TrajSurrogate::point_of(const TrajectorySet& traj, double eta) const {
    Eigen::VectorXd x(num_vars());
    x[0] = eta;
    for (int m = 0; m < s_.num_uavs(); ++m) {
        for (int w = 1; w < s_.num_slots; ++w) {
            for (int d = 0; d < 2; ++d) x[var(m, w, d)] = traj.paths[m](d, w);
        }
    }
    return x;
}

TrajectorySet TrajSurrogate::traj_of(const Eigen::VectorXd& x, const TrajectorySet& pinned) const {
    TrajectorySet t = pinned;
    for (int m = 0; m < s_.num_uavs(); ++m) {
        for (int w = 1; w < s_.num_slots; ++w) {
            for (int d = 0; d < 2; ++d) t.paths[m](d, w) = x[var(m, w, d)];
        }
    }
    return t;
}

std::vector<double> TrajSurrogate::pair_secrecy(const TrajectorySet& traj) const {
    std::vector<double> out(num_pairs(), 0.0);
    const double H = s_.altitude;
    std::vector<std::pair<double, double>> jam;
    auto d2 = [&](int m, int n, const Vec2& w) { return link_distance_sq(traj.at_slot(m, n), w, H); };
    for (const Tx& t : txs_) {
        const Vec2& user = s_.users[t.k];
        jam.clear();
        for (const auto& [o, c] : t.jammers) jam.emplace_back(c, d2(o, t.n, user));
        const double r = f_value(t.signal, d2(t.m, t.n, user), jam) - f_value(0.0, 1.0, jam);
        for (int e = 0; e < eves_; ++e) {
            double leak = 0.0;
            if (e < s_.num_eves()) {
                jam.clear();
                for (const auto& [o, c] : t.jammers) jam.emplace_back(c, d2(o, t.n, s_.eves[e]));
                leak = f_value(t.signal, d2(t.m, t.n, s_.eves[e]), jam) - f_value(0.0, 1.0, jam);
            }
            out[t.k * eves_ + e] += r - leak;
        }
    }
    for (double& v : out) v /= s_.num_slots * kLn2;
    return out;
}

std::vector<double> TrajSurrogate::pair_lower_bound(const TrajectorySet& traj,
                                                    const TrajIterate& at) const {
    const cvx::Program p = build(at);
    const Eigen::VectorXd x = point_of(traj, 0.0);
    std::vector<double> out(num_pairs());
    for (int j = 0; j < num_pairs(); ++j) out[j] = p.constraints[j].eval(x);
    return out;
}

cvx::Affine TrajSurrogate::lower_sq(int m, int w, int node, const TrajIterate& at) const {
    // d^2 >= t_lb + 2 (q0 - w) . (q - q0)
    const Vec2 q0 = at.traj.q(m, w);
    const Vec2& pos = node < users_ ? s_.users[node] : s_.eves[node - users_];
    const double y0 = at.t_lb(w - 1, m, node);
    if (var(m, w, 0) < 0) return cvx::Affine(y0);
    const Vec2 u = 2.0 * (q0 - pos);
    cvx::Affine a(y0 - u.dot(q0));
    a.add(var(m, w, 0), u.x()).add(var(m, w, 1), u.y());
    return a;
}

void TrajSurrogate::add_pair(cvx::Expression& g, int k, int e, const TrajIterate& at) const {
    const int M = s_.num_uavs(), nodes = users_ + s_.num_eves();
    const double w = 1.0 / (s_.num_slots * kLn2);
    const double H2 = s_.altitude * s_.altitude;
    // coefficient of t (= d^2, kept tight) per (slot, uav, node) from the
    // linearized convex terms
    std::vector<double> coef(static_cast<std::size_t>(s_.num_slots) * M * nodes, 0.0);
    auto key = [&](int n, int m, int node) { return (static_cast<std::size_t>(n) * M + m) * nodes + node; };
    std::vector<std::pair<double, double>> jam;
    std::vector<double> grad;

    // +f linearized in t at the expansion point
    auto add_convex = [&](const Tx& t, int node, double signal) {
        jam.clear();
        for (const auto& [o, c] : t.jammers) jam.emplace_back(c, at.t(t.n, o, node));
        const double ys = at.t(t.n, t.m, node);
        const double f0 = f_value(signal, ys, jam, &grad);
        double c0 = f0;
        c0 -= grad[0] * ys;
        coef[key(t.n, t.m, node)] += w * grad[0];
        for (std::size_t j = 0; j < t.jammers.size(); ++j) {
            const int o = t.jammers[j].first;
            c0 -= grad[j + 1] * jam[j].second;
            coef[key(t.n, o, node)] += w * grad[j + 1];
        }
        g.add_constant(w * c0);
    };
    // -f kept exact in the lower-bounded t'
    auto add_concave = [&](const Tx& t, int node, double signal) {
        std::vector<std::pair<double, cvx::Affine>> terms;
        bool constant = true;
        double a0 = 1.0;
        auto push = [&](int m, double c) {
            cvx::Affine a = lower_sq(m, t.n + 1, node, at);
            if (a.idx.empty()) {
                a0 += c / a.constant;
            } else {
                constant = false;
                terms.emplace_back(c, std::move(a));
            }
        };
        if (signal > 0.0) push(t.m, signal);
        for (const auto& [o, c] : t.jammers) push(o, c);
        if (terms.empty() && a0 == 1.0) return;
        if (constant) {
            g.add_constant(-w * std::log(a0));
        } else {
            g.add_neg_log_inv_sum(a0, std::move(terms), w);
        }
    };

    for (const Tx& t : txs_) {
        if (t.k != k) continue;
        add_convex(t, k, t.signal);
        if (!t.jammers.empty()) add_concave(t, k, 0.0);
        if (e < s_.num_eves()) {
            const int node = users_ + e;
            add_concave(t, node, t.signal);
            if (!t.jammers.empty()) add_convex(t, node, 0.0);
        }
    }

    for (int n = 0; n < s_.num_slots; ++n) {
        for (int m = 0; m < M; ++m) {
            for (int node = 0; node < nodes; ++node) {
                const double c = coef[key(n, m, node)];
                if (c == 0.0) continue;
                const Vec2& pos = node < users_ ? s_.users[node] : s_.eves[node - users_];
                const int wp = n + 1;
                if (var(m, wp, 0) < 0) {
                    g.add_constant(c * link_distance_sq(at.traj.q(m, wp), pos, s_.altitude));
                    continue;
                }
                // c * (||q - w||^2 + H^2) with c < 0
                g.add_constant(c * H2);
                g.add_neg_sq_norm({cvx::Affine(-pos.x()).add(var(m, wp, 0), 1.0),
                                   cvx::Affine(-pos.y()).add(var(m, wp, 1), 1.0)},
                                  -c);
            }
        }
    }
}

cvx::Program TrajSurrogate::build(const TrajIterate& at) const {
    cvx::Program prog;
    prog.add_var(true);
    for (int j = 1; j < num_vars(); ++j) prog.add_var();
    const int M = s_.num_uavs(), N = s_.num_slots;

    for (int k = 0; k < users_; ++k) {
        for (int e = 0; e < eves_; ++e) {
            cvx::Expression& g = prog.constraints.emplace_back();
            add_pair(g, k, e, at);
            g.add_linear(cvx::Affine().add(0, -1.0));
        }
    }
    prog.objective.add_linear(cvx::Affine().add(0, 1.0));

    auto coord = [&](int m, int w, int d) {
        const int v = var(m, w, d);
        return v < 0 ? cvx::Affine(at.traj.paths[m](d, w)) : cvx::Affine().add(v, 1.0);
    };
    auto minus = [](cvx::Affine a, const cvx::Affine& b) {
        a.constant -= b.constant;
        for (std::size_t j = 0; j < b.idx.size(); ++j) a.add(b.idx[j], -b.coef[j]);
        return a;
    };

    // speed: 1 - ||q[w] - q[w-1]||^2 / V^2 >= 0
    const double V = s_.max_step();
    for (int m = 0; m < M; ++m) {
        for (int w = 1; w <= N; ++w) {
            if (var(m, w, 0) < 0 && var(m, w - 1, 0) < 0) continue;
            prog.constraints.emplace_back()
                .add_constant(1.0)
                .add_neg_sq_norm({minus(coord(m, w, 0), coord(m, w - 1, 0)),
                                  minus(coord(m, w, 1), coord(m, w - 1, 1))},
                                 1.0 / (V * V));
        }
    }
    // no-fly zones and separation, in meters of clearance
    for (int m = 0; m < M; ++m) {
        for (int w = 1; w < N; ++w) {
            for (const auto& z : s_.nfzs) {
                const HalfPlane h = nfz_half_plane(at.traj.q(m, w), z);
                const double scale = 1.0 / h.normal.norm();
                prog.constraints.emplace_back().add_linear(
                    cvx::Affine(-h.offset * scale)
                        .add(var(m, w, 0), h.normal.x() * scale)
                        .add(var(m, w, 1), h.normal.y() * scale));
            }
            for (int o = m + 1; o < M; ++o) {
                const HalfPlane h =
                    separation_half_plane(at.traj.q(m, w), at.traj.q(o, w), s_.safety_distance);
                const double scale = 1.0 / h.normal.norm();
                prog.constraints.emplace_back().add_linear(
                    cvx::Affine(-h.offset * scale)
                        .add(var(m, w, 0), h.normal.x() * scale)
                        .add(var(m, w, 1), h.normal.y() * scale)
                        .add(var(o, w, 0), -h.normal.x() * scale)
                        .add(var(o, w, 1), -h.normal.y() * scale));
            }
        }
    }
    return prog;
}

namespace {

bool geometry_ok(const TrajectorySet& t, const Scenario& s, double tol) {
    const double V = s.max_step();
    for (int m = 0; m < s.num_uavs(); ++m) {
        if ((t.q(m, 0) - s.uavs[m].start).norm() > 0.0) return false;
        if ((t.q(m, s.num_slots) - s.uavs[m].end).norm() > 0.0) return false;
        for (int w = 0; w <= s.num_slots; ++w) {
            if (!t.q(m, w).allFinite()) return false;
            if (w > 0 && (t.q(m, w) - t.q(m, w - 1)).norm() > V + tol) return false;
            for (const auto& z : s.nfzs) {
                if ((t.q(m, w) - z.center).norm() < z.radius - tol) return false;
            }
            for (int o = m + 1; o < s.num_uavs(); ++o) {
                if ((t.q(m, w) - t.q(o, w)).norm() < s.safety_distance - tol) return false;
            }
        }
    }
    return true;
}

double min_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : *std::min_element(v.begin(), v.end());
}

}  // namespace

TrajResult solve_traj(const AllocationState& st, const TrajectorySet& traj_in, const Scenario& s,
                      const TrajOptions& opts) {
    TrajResult result;
    result.traj = traj_in;
    result.eta = objective(st, traj_in, s);
    if (s.num_slots < 2 || s.num_users() == 0) return result;

    const TrajSurrogate sur(st, s);
    TrajectorySet at = traj_in;
    double prev = min_of(sur.pair_secrecy(at));
    for (int it = 0; it < opts.max_sca; ++it) {
        const TrajIterate slack = init_slacks(at, s);
        const cvx::Program prog = sur.build(slack);
        Eigen::VectorXd start = sur.point_of(at, prev - 1.0);
        const cvx::Solution sol = cvx::solve(prog, start, opts.solver);
        if (sol.status == cvx::Status::infeasible || sol.status == cvx::Status::numerical_failure) {
            result.solver_failed = true;
            break;
        }
        const TrajectorySet next = sur.traj_of(sol.x, at);
        if (!geometry_ok(next, s, 1e-6)) {
            result.solver_failed = true;
            break;
        }
        const double value = min_of(sur.pair_secrecy(next));
        result.iterations = it + 1;
        if (opts.record_iterates) result.iterates.push_back(next);
        result.surrogate_trace.push_back(value);
        const double eta = objective(st, next, s);
        if (eta > result.eta) {
            result.traj = next;
            result.eta = eta;
            result.accepted = true;
        }
        const bool settled = std::abs(value - prev) <= opts.tol * (1.0 + std::abs(prev));
        at = next;
        prev = value;
        if (settled) break;
    }
    return result;
}

}  // namespace uavsec
