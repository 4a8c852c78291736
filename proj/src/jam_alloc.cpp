#include "uavsec/jam_alloc.hpp"

#include "uavsec/rates.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace uavsec {

namespace {

constexpr double kLn2 = std::numbers::ln2;

int s_var(int c) { return 1 + 2 * c; }
int p_var(int c) { return 2 + 2 * c; }

}  // namespace

std::vector<double> residual_budget(const AllocationState& comm, const Scenario& s) {
    std::vector<double> out(static_cast<std::size_t>(s.num_slots) * s.num_uavs());
    for (int n = 0; n < s.num_slots; ++n) {
        for (int m = 0; m < s.num_uavs(); ++m) {
            out[n * s.num_uavs() + m] =
                std::max(0.0, s.uavs[m].peak_power - comm.comm_power_used(n, m));
        }
    }
    return out;
}

JamSurrogate::JamSurrogate(const AllocationState& comm, const TrajectorySet& traj,
                           const Scenario& s, double zeta, const std::vector<bool>& can_jam)
    : comm_(comm), s_(s), zeta_(zeta), users_(s.num_users()), eves_(std::max(1, s.num_eves())) {
    const int N = s.num_slots, M = s.num_uavs(), K = users_, F = s.num_subcarriers;
    const LinkGains g(traj, s);
    const std::vector<double> budget = residual_budget(comm, s);
    const double sigma = s.noise_power;

    auto transmitting = [&](int n, int m, int i) {
        for (int k = 0; k < K; ++k) {
            if (comm.comm_tx(n, m, k, i) > 0.0) return true;
        }
        return false;
    };
    auto scheduled = [&](int n, int m, int i) {
        for (int k = 0; k < K; ++k) {
            if (comm.sched(n, m, k, i) != 0.0) return true;
        }
        return false;
    };

    std::vector<int> cell_of(static_cast<std::size_t>(N) * M * F, -1);
    for (int n = 0; n < N; ++n) {
        for (int i = 0; i < F; ++i) {
            for (int m = 0; m < M; ++m) {
                if (!can_jam.empty() && !can_jam[m]) continue;
                if (scheduled(n, m, i) || budget[n * M + m] <= 0.0) continue;
                bool useful = false;
                for (int o = 0; o < M && !useful; ++o) useful = o != m && transmitting(n, o, i);
                if (!useful) continue;
                cell_of[(n * M + m) * F + i] = static_cast<int>(cells_.size());
                cells_.push_back({n, m, i, budget[n * M + m]});
            }
        }
    }

    for (int n = 0; n < N; ++n) {
        for (int m = 0; m < M; ++m) {
            for (int k = 0; k < K; ++k) {
                for (int i = 0; i < F; ++i) {
                    const double p = comm.comm_tx(n, m, k, i);
                    if (p <= 0.0) continue;
                    Term t;
                    t.user_index = k;
                    t.signal = p * g.user(n, m, k) / sigma;
                    t.leak.assign(eves_, 0.0);
                    t.eve.assign(eves_, {});
                    for (int e = 0; e < s.num_eves(); ++e) t.leak[e] = p * g.eve(n, m, e) / sigma;
                    for (int o = 0; o < M; ++o) {
                        const int c = o == m ? -1 : cell_of[(n * M + o) * F + i];
                        if (c < 0) continue;
                        t.vars.push_back(p_var(c));
                        t.user.push_back(g.user(n, o, k) / sigma);
                        for (int e = 0; e < eves_; ++e) {
                            t.eve[e].push_back(e < s.num_eves() ? g.eve(n, o, e) / sigma : 0.0);
                        }
                    }
                    terms_.push_back(std::move(t));
                }
            }
        }
    }
}

double JamSurrogate::affine(const Term& t, const std::vector<double>& g,
                            const Eigen::VectorXd& x) const {
    double v = 0.0;
    for (std::size_t j = 0; j < t.vars.size(); ++j) v += g[j] * x[t.vars[j]];
    return v;
}

Eigen::VectorXd JamSurrogate::point_of(const AllocationState& jam) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(num_vars());
    for (std::size_t c = 0; c < cells_.size(); ++c) {
        const auto& cell = cells_[c];
        x[s_var(c)] = jam.jam_sched(cell.n, cell.m, cell.i);
        x[p_var(c)] = jam.jam_tx(cell.n, cell.m, cell.i);
    }
    x[0] = min_pair(x);
    return x;
}

AllocationState JamSurrogate::rounded(const Eigen::VectorXd& x) const {
    AllocationState st = comm_;
    st.clear_jamming();
    for (std::size_t c = 0; c < cells_.size(); ++c) {
        const auto& cell = cells_[c];
        // a switched-on jammer without power only blocks the subcarrier
        if (x[s_var(c)] < 0.5 || x[p_var(c)] <= 1e-6 * cell.budget) continue;
        st.jam_sched(cell.n, cell.m, cell.i) = 1.0;
        st.jam_power(cell.n, cell.m, cell.i) = std::clamp(x[p_var(c)], 0.0, cell.budget);
    }
    return st;
}

std::vector<double> JamSurrogate::pair_secrecy(const Eigen::VectorXd& x) const {
    std::vector<double> out(num_pairs(), 0.0);
    for (const Term& t : terms_) {
        const double iu = affine(t, t.user, x);
        const double r = std::log1p(t.signal + iu) - std::log1p(iu);
        for (int e = 0; e < eves_; ++e) {
            const double ie = affine(t, t.eve[e], x);
            out[t.user_index * eves_ + e] += r - std::log1p(t.leak[e] + ie) + std::log1p(ie);
        }
    }
    for (double& v : out) v /= s_.num_slots * kLn2;
    return out;
}

std::vector<double> JamSurrogate::pair_lower_bound(const Eigen::VectorXd& x,
                                                   const Eigen::VectorXd& at) const {
    // -log(a) >= -log(a0) - (a - a0) / a0
    std::vector<double> out(num_pairs(), 0.0);
    for (const Term& t : terms_) {
        const double iu = affine(t, t.user, x), iu0 = affine(t, t.user, at);
        const double r = std::log1p(t.signal + iu) - std::log1p(iu0) - (iu - iu0) / (1.0 + iu0);
        for (int e = 0; e < eves_; ++e) {
            const double ie = affine(t, t.eve[e], x), ie0 = affine(t, t.eve[e], at);
            const double a0 = 1.0 + t.leak[e] + ie0;
            out[t.user_index * eves_ + e] += r - std::log(a0) - (ie - ie0) / a0 + std::log1p(ie);
        }
    }
    for (double& v : out) v /= s_.num_slots * kLn2;
    return out;
}

double JamSurrogate::min_pair(const Eigen::VectorXd& x) const {
    const auto p = pair_secrecy(x);
    return p.empty() ? 0.0 : *std::min_element(p.begin(), p.end());
}

double JamSurrogate::penalized(const Eigen::VectorXd& x, double phi) const {
    const auto pairs = pair_secrecy(x);
    double mean = 0.0;
    for (double v : pairs) mean += v;
    mean /= std::max<std::size_t>(1, pairs.size());
    double binary = 0.0;
    for (std::size_t c = 0; c < cells_.size(); ++c) {
        const double sc = x[s_var(c)];
        binary += sc - sc * sc;
    }
    return (1.0 - zeta_) * x[0] + zeta_ * mean - phi * binary;
}

double JamSurrogate::cell_scale() const {
    if (terms_.empty()) return 0.0;
    double sum = 0.0;
    for (const Term& t : terms_) sum += std::log2(1.0 + t.signal);
    return sum / terms_.size() / s_.num_slots;
}

cvx::Program JamSurrogate::build(const Eigen::VectorXd& at, double phi) const {
    using cvx::Affine;
    cvx::Program prog;
    prog.add_var(true);  // eta
    for (std::size_t c = 0; c < cells_.size(); ++c) {
        prog.add_var();
        prog.add_var();
    }
    const int nv = prog.num_vars;

    // Adds the concave restriction of one transmission's secrecy against
    // eve e (or all eves when e < 0) to `expr`, weighted by `w`; linear
    // parts go to `lin` and `constant`.
    auto add_term = [&](const Term& t, int e_only, double w, cvx::Expression& expr,
                        Eigen::VectorXd& lin, double& constant) {
        auto log_of = [&](double c0, const std::vector<double>& g, double weight) {
            if (t.vars.empty()) {
                constant += weight * std::log(c0);
                return;
            }
            Affine a(c0);
            for (std::size_t j = 0; j < t.vars.size(); ++j) {
                if (g[j] != 0.0) a.add(t.vars[j], g[j]);
            }
            if (a.idx.empty()) {
                constant += weight * std::log(c0);
            } else {
                expr.add_log(std::move(a), weight);
            }
        };
        auto minus_log_lin = [&](double c0, const std::vector<double>& g, double weight) {
            const double a0 = c0 + affine(t, g, at);
            constant -= weight * (std::log(a0) - (a0 - c0) / a0);
            for (std::size_t j = 0; j < t.vars.size(); ++j) lin[t.vars[j]] -= weight * g[j] / a0;
        };
        const int lo = e_only < 0 ? 0 : e_only, hi = e_only < 0 ? eves_ : e_only + 1;
        const double wu = w * (hi - lo);
        log_of(1.0 + t.signal, t.user, wu);
        minus_log_lin(1.0, t.user, wu);
        for (int e = lo; e < hi; ++e) {
            minus_log_lin(1.0 + t.leak[e], t.eve[e], w);
            log_of(1.0, t.eve[e], w);
        }
    };

    const double N = s_.num_slots;
    {
        Eigen::VectorXd lin = Eigen::VectorXd::Zero(nv);
        double constant = 0.0;
        const double w = zeta_ / (num_pairs() * N * kLn2);
        for (const Term& t : terms_) add_term(t, -1, w, prog.objective, lin, constant);
        lin[0] += 1.0 - zeta_;
        for (std::size_t c = 0; c < cells_.size(); ++c) {
            const double sl = at[s_var(c)];
            lin[s_var(c)] += phi * (2.0 * sl - 1.0);
            constant -= phi * sl * sl;
        }
        Affine a(0.0);
        for (int j = 0; j < nv; ++j) {
            if (lin[j] != 0.0) a.add(j, lin[j]);
        }
        prog.objective.add_linear(std::move(a)).add_constant(constant);
    }

    for (int k = 0; k < users_; ++k) {
        for (int e = 0; e < eves_; ++e) {
            cvx::Expression& g = prog.constraints.emplace_back();
            Eigen::VectorXd lin = Eigen::VectorXd::Zero(nv);
            double constant = 0.0;
            for (const Term& t : terms_) {
                if (t.user_index == k) add_term(t, e, 1.0 / (N * kLn2), g, lin, constant);
            }
            lin[0] -= 1.0;
            Affine a(0.0);
            for (int j = 0; j < nv; ++j) {
                if (lin[j] != 0.0) a.add(j, lin[j]);
            }
            g.add_linear(std::move(a)).add_constant(constant);
        }
    }

    std::vector<Affine> budget(static_cast<std::size_t>(s_.num_slots) * s_.num_uavs());
    std::vector<bool> used(budget.size(), false);
    for (std::size_t c = 0; c < cells_.size(); ++c) {
        const auto& cell = cells_[c];
        prog.add_lower_bound(s_var(c), 0.0);
        prog.add_upper_bound(s_var(c), 1.0);
        prog.add_lower_bound(p_var(c), 0.0);
        prog.constraints.emplace_back().add_linear(
            Affine().add(s_var(c), cell.budget).add(p_var(c), -1.0));
        const std::size_t b = static_cast<std::size_t>(cell.n) * s_.num_uavs() + cell.m;
        if (!used[b]) budget[b].constant = cell.budget;
        used[b] = true;
        budget[b].add(p_var(c), -1.0);
    }
    for (std::size_t b = 0; b < budget.size(); ++b) {
        if (used[b]) prog.constraints.emplace_back().add_linear(std::move(budget[b]));
    }
    return prog;
}

namespace {

/// Strictly interior copy of a relaxed point (schedule, power and budget
/// constraints all slack).
Eigen::VectorXd interior(const JamSurrogate& sur, const Eigen::VectorXd& x) {
    Eigen::VectorXd y = x;
    const auto& cells = sur.cells();
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const double B = cells[c].budget;
        double p = std::clamp(x[2 + 2 * c], 0.0, B);
        p = 0.98 * p + 1e-3 * B / std::max<std::size_t>(1, cells.size());
        y[2 + 2 * c] = p;
        y[1 + 2 * c] = std::clamp(x[1 + 2 * c], p / B + 1e-3, 1.0 - 1e-3);
    }
    return y;
}

double binariness(const JamSurrogate& sur, const Eigen::VectorXd& x) {
    double worst = 0.0;
    for (std::size_t c = 0; c < sur.cells().size(); ++c) {
        const double s = x[1 + 2 * c];
        worst = std::max(worst, s * (1.0 - s));
    }
    return worst;
}

bool relaxed_feasible(const JamSurrogate& sur, const Eigen::VectorXd& x, const Scenario& s) {
    std::vector<double> used(static_cast<std::size_t>(s.num_slots) * s.num_uavs(), 0.0);
    const auto& cells = sur.cells();
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const double sc = x[1 + 2 * c], p = x[2 + 2 * c];
        if (sc < 0.0 || sc > 1.0 || p < 0.0 || p > sc * cells[c].budget) return false;
        used[cells[c].n * s.num_uavs() + cells[c].m] += p;
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
        if (used[cells[c].n * s.num_uavs() + cells[c].m] > cells[c].budget) return false;
    }
    return true;
}

/// Doubling steps along the SCA direction while the true penalized
/// objective keeps improving; the D.C. iteration alone crawls when the
/// linearized log terms are far from their expansion point.
void extrapolate(const JamSurrogate& sur, const Eigen::VectorXd& from, Eigen::VectorXd& to,
                 double& value, double phi, const Scenario& s) {
    const Eigen::VectorXd d = to - from;
    for (double t = 2.0; t <= 1024.0; t *= 2.0) {
        Eigen::VectorXd y = from + t * d;
        if (!relaxed_feasible(sur, y, s)) break;
        y[0] = sur.min_pair(y);
        const double v = sur.penalized(y, phi);
        if (!(v > value)) break;
        to = y;
        value = v;
    }
}

/// Scales the jamming of every (slot, uav) up so that the radiated total
/// reaches the peak power, keeping the on/off pattern.
AllocationState fill_budget(AllocationState st, const Scenario& s) {
    for (int n = 0; n < st.slots(); ++n) {
        for (int m = 0; m < st.uavs(); ++m) {
            double jam = 0.0;
            for (int i = 0; i < st.subcarriers(); ++i) jam += st.jam_tx(n, m, i);
            if (jam <= 0.0) continue;
            const double room = s.uavs[m].peak_power - st.comm_power_used(n, m);
            if (room <= jam) continue;
            const double scale = room / jam;
            for (int i = 0; i < st.subcarriers(); ++i) st.jam_power(n, m, i) *= scale;
        }
    }
    return st;
}

}  // namespace

JamResult solve_jam(const AllocationState& state_in, const TrajectorySet& traj, const Scenario& s,
                    const JamOptions& opts) {
    JamResult result;
    result.state = state_in;
    result.eta = objective(state_in, traj, s);

    const JamSurrogate sur(state_in, traj, s, opts.zeta, opts.can_jam);
    if (sur.cells().empty() || s.num_users() == 0) return result;

    // Expansion from every candidate switched on: incoming jammers keep their
    // power, the others share half of what is left.
    Eigen::VectorXd x = sur.point_of(state_in);
    {
        const int M = s.num_uavs();
        std::vector<int> idle(static_cast<std::size_t>(s.num_slots) * M, 0);
        std::vector<double> spent(idle.size(), 0.0);
        for (std::size_t c = 0; c < sur.cells().size(); ++c) {
            const JamCell& cell = sur.cells()[c];
            if (x[1 + 2 * c] >= 0.5) {
                spent[cell.n * M + cell.m] += x[2 + 2 * c];
            } else {
                ++idle[cell.n * M + cell.m];
            }
        }
        for (std::size_t c = 0; c < sur.cells().size(); ++c) {
            const JamCell& cell = sur.cells()[c];
            const int b = cell.n * M + cell.m;
            if (x[1 + 2 * c] < 0.5) {
                x[2 + 2 * c] = 0.5 * std::max(0.0, cell.budget - spent[b]) / idle[b];
            }
            x[1 + 2 * c] = 1.0;
        }
        x[0] = sur.min_pair(x);
    }

    double phi = opts.phi_scale * sur.cell_scale();
    if (!(phi > 0.0)) phi = 1e-3;

    for (int round = 0; round < opts.max_rounds; ++round) {
        double prev = sur.penalized(x, phi);
        result.trace.push_back({round, phi, prev, binariness(sur, x)});
        for (int it = 0; it < opts.max_sca; ++it) {
            const cvx::Program prog = sur.build(x, phi);
            Eigen::VectorXd start = interior(sur, x);
            const std::vector<double> bound = sur.pair_lower_bound(start, x);
            start[0] = *std::min_element(bound.begin(), bound.end()) - 1.0;
            const cvx::Solution sol = cvx::solve(prog, start, opts.solver);
            if (sol.status == cvx::Status::infeasible ||
                sol.status == cvx::Status::numerical_failure) {
                result.solver_failed = true;
                break;
            }
            Eigen::VectorXd next = sol.x;
            next[0] = std::max(next[0], sur.min_pair(next));
            double value = sur.penalized(next, phi);
            if (value < prev - 1e-6 * (1.0 + std::abs(prev))) break;  // no ascent left
            extrapolate(sur, x, next, value, phi, s);
            x = next;
            result.trace.push_back({round, phi, value, binariness(sur, x)});
            const bool settled = std::abs(value - prev) <= opts.tol * (1.0 + std::abs(prev));
            prev = value;
            if (settled) break;
        }
        if (result.solver_failed) break;
        result.binariness = binariness(sur, x);
        if (result.binariness < opts.binary_tol) break;
        phi *= opts.phi_growth;
    }
    result.binariness = binariness(sur, x);

    const AllocationState plain = sur.rounded(x);
    const AllocationState filled = fill_budget(plain, s);
    for (const AllocationState* cand : {&plain, &filled}) {
        const double eta = objective(*cand, traj, s);
        if (eta > result.eta) {
            result.state = *cand;
            result.eta = eta;
            result.accepted = true;
        }
    }
    return result;
}

}  // namespace uavsec
