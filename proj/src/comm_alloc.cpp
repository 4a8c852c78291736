#include "uavsec/comm_alloc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace uavsec {

namespace {

constexpr double kLn2 = std::numbers::ln2;

int pseudo_eves(const Scenario& s) { return std::max(1, s.num_eves()); }

bool finite_all(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

/// d/dp of sum_e alpha_e [log2(1 + p H) - log2(1 + p H'_e)] - theta p.
double power_slope(std::span<const double> alpha, double theta, double H,
                   std::span<const double> Heve, double p) {
    double d = 0.0;
    for (std::size_t e = 0; e < alpha.size(); ++e) {
        if (alpha[e] <= 0.0) continue;
        d += alpha[e] * (H / (1.0 + p * H) - Heve[e] / (1.0 + p * Heve[e]));
    }
    return d / kLn2 - theta;
}

double power_curvature(std::span<const double> alpha, double H, std::span<const double> Heve,
                       double p) {
    double c = 0.0;
    for (std::size_t e = 0; e < alpha.size(); ++e) {
        if (alpha[e] <= 0.0) continue;
        const double a = H / (1.0 + p * H), b = Heve[e] / (1.0 + p * Heve[e]);
        c += alpha[e] * (b * b - a * a);
    }
    return c / kLn2;
}

/// Single-eve water level, written without the cancellation of
/// sqrt(G^2 + cG) - G when G = 1/H' - 1/H is large.
double closed_form_power(double alpha, double theta, double H, double He) {
    const double c = 4.0 * alpha / (theta * kLn2);
    if (He <= 0.0) return alpha / (theta * kLn2) - 1.0 / H;
    const double G = 1.0 / He - 1.0 / H;
    const double root = std::sqrt(G * G + c * G);
    return c * G / (2.0 * (root + G)) - 1.0 / H;
}

}  // namespace

DualState DualState::initial(const Scenario& s) {
    DualState d;
    d.users = s.num_users();
    d.eves = pseudo_eves(s);
    d.slots = s.num_slots;
    d.uavs = s.num_uavs();
    d.subcarriers = s.num_subcarriers;
    const int pairs = std::max(1, d.users * d.eves);
    d.alpha.assign(static_cast<std::size_t>(d.users) * d.eves, 1.0 / pairs);
    d.beta.assign(static_cast<std::size_t>(d.slots) * d.subcarriers, 0.0);
    d.eps.assign(static_cast<std::size_t>(d.slots) * d.uavs * d.subcarriers, 0.0);
    d.theta.assign(static_cast<std::size_t>(d.slots) * d.uavs, 1.0);
    return d;
}

EffectiveGains::EffectiveGains(const AllocationState& jam, const LinkGains& g, const Scenario& s)
    : uavs_(s.num_uavs()), users_(s.num_users()), eves_(pseudo_eves(s)),
      subcarriers_(s.num_subcarriers) {
    const int N = s.num_slots;
    comm_.assign(static_cast<std::size_t>(N) * uavs_ * users_ * subcarriers_, 0.0);
    eve_.assign(static_cast<std::size_t>(N) * uavs_ * subcarriers_ * eves_, 0.0);
    for (int n = 0; n < N; ++n) {
        for (int m = 0; m < uavs_; ++m) {
            for (int i = 0; i < subcarriers_; ++i) {
                for (int k = 0; k < users_; ++k) {
                    comm_[idx_u(n, m, k, i)] =
                        g.user(n, m, k) / (user_interference(n, m, k, i, jam, g) + s.noise_power);
                }
                for (int e = 0; e < s.num_eves(); ++e) {
                    eve_[idx_e(n, m, e, i)] =
                        g.eve(n, m, e) / (eve_interference(n, m, e, i, jam, g) + s.noise_power);
                }
            }
        }
    }
}

EffectiveGains effective_gains(const TrajectorySet& traj, const AllocationState& jam,
                               const Scenario& s) {
    return EffectiveGains(jam, LinkGains(traj, s), s);
}

double optimal_power(std::span<const double> alpha, double theta, double H,
                     std::span<const double> Heve, double p_cap) {
    if (!std::isfinite(theta) || !std::isfinite(H) || !std::isfinite(p_cap) ||
        !finite_all(alpha) || !finite_all(Heve) || alpha.size() != Heve.size()) {
        throw std::invalid_argument("optimal_power: non-finite or mismatched input");
    }
    if (p_cap <= 0.0) return 0.0;
    int active = 0, last = -1;
    double worst_eve = 0.0;
    for (std::size_t e = 0; e < alpha.size(); ++e) {
        if (alpha[e] <= 0.0) continue;
        ++active;
        last = static_cast<int>(e);
        worst_eve = std::max(worst_eve, Heve[e]);
    }
    if (active == 0 || H <= worst_eve) return 0.0;
    if (power_slope(alpha, theta, H, Heve, 0.0) <= 0.0) return 0.0;
    if (power_slope(alpha, theta, H, Heve, p_cap) >= 0.0) return p_cap;
    if (active == 1) {
        return std::clamp(closed_form_power(alpha[last], theta, H, Heve[last]), 0.0, p_cap);
    }

    // slope is decreasing on [0, p_cap] with a sign change: Newton inside a bracket
    double lo = 0.0, hi = p_cap, p = 0.5 * p_cap;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + hi); ++it) {
        const double d = power_slope(alpha, theta, H, Heve, p);
        (d > 0.0 ? lo : hi) = p;
        const double c = power_curvature(alpha, H, Heve, p);
        double next = c < 0.0 ? p - d / c : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - p) <= 1e-15 * (1.0 + p)) {
            p = next;
            break;
        }
        p = next;
    }
    return p;
}

double scheduling_metric(std::span<const double> alpha, double beta, double eps, double p,
                         double H, std::span<const double> Heve) {
    const double L = p * H;
    double score = 0.0;
    for (std::size_t e = 0; e < alpha.size(); ++e) {
        if (alpha[e] == 0.0) continue;
        const double Le = p * Heve[e];
        score += alpha[e] * (std::log2((1.0 + L) / (1.0 + Le)) - L / ((1.0 + L) * kLn2) +
                             Le / ((1.0 + Le) * kLn2));
    }
    return score - beta - eps;
}

std::optional<std::pair<int, int>> select_assignment(const Eigen::MatrixXd& scores) {
    std::optional<std::pair<int, int>> best;
    double top = 0.0;
    for (int m = 0; m < scores.rows(); ++m) {
        for (int k = 0; k < scores.cols(); ++k) {
            if (scores(m, k) > top) {
                top = scores(m, k);
                best = {m, k};
            }
        }
    }
    return best;
}

DualState update_multipliers(const DualState& dual, const AllocationState& state,
                             const Scenario& s, const std::vector<double>& surplus, int l,
                             const CommOptions& opts) {
    if (l < 1) throw std::invalid_argument("update_multipliers: iteration index must be >= 1");
    DualState next = dual;
    const double root = std::sqrt(static_cast<double>(l));
    const double da = opts.steps[0] / root, db = opts.steps[1] / root,
                 de = opts.steps[2] / root, dt = opts.steps[3] / root;

    double total = 0.0;
    for (std::size_t j = 0; j < next.alpha.size(); ++j) {
        next.alpha[j] = std::max(0.0, dual.alpha[j] - da * surplus[j]);
        total += next.alpha[j];
    }
    if (!next.alpha.empty()) {
        if (total > 0.0) {
            for (double& a : next.alpha) a /= total;
        } else {
            std::fill(next.alpha.begin(), next.alpha.end(), 1.0 / next.alpha.size());
        }
    }

    for (int n = 0; n < dual.slots; ++n) {
        for (int i = 0; i < dual.subcarriers; ++i) {
            double used = 0.0;
            for (int m = 0; m < dual.uavs; ++m) {
                for (int k = 0; k < dual.users; ++k) used += state.sched(n, m, k, i);
            }
            next.b(n, i) = std::max(0.0, dual.b(n, i) - db * (1.0 - used));
        }
        for (int m = 0; m < dual.uavs; ++m) {
            for (int i = 0; i < dual.subcarriers; ++i) {
                double used = state.jam_sched(n, m, i);
                for (int k = 0; k < dual.users; ++k) used += state.sched(n, m, k, i);
                next.ep(n, m, i) = std::max(0.0, dual.ep(n, m, i) - de * (1.0 - used));
            }
            const double slack = s.uavs[m].peak_power - state.total_power(n, m);
            next.th(n, m) = std::max(opts.theta_min, dual.th(n, m) - dt * slack);
        }
    }
    return next;
}

namespace {

/// Primal step of the dual decomposition for fixed multipliers.
class CommPrimal {
public:
    CommPrimal(const AllocationState& jam, const EffectiveGains& eg, const Scenario& s,
               const CommOptions& opts)
        : jam_(jam), eg_(eg), s_(s), opts_(opts), N_(s.num_slots), M_(s.num_uavs()),
          K_(s.num_users()), F_(s.num_subcarriers), budget_(N_ * M_, 0.0),
          assign_(N_ * F_, -1), power_(N_ * F_, 0.0) {
        for (int n = 0; n < N_; ++n) {
            for (int m = 0; m < M_; ++m) {
                double jam_used = 0.0;
                for (int i = 0; i < F_; ++i) jam_used += jam.jam_tx(n, m, i);
                budget_[n * M_ + m] = std::max(0.0, s.uavs[m].peak_power - jam_used);
            }
        }
    }

    double budget(int n, int m) const { return budget_[n * M_ + m]; }

    bool usable(int n, int m, int k, int i) const {
        if (!opts_.can_communicate.empty() && !opts_.can_communicate[m]) return false;
        if (jam_.jam_sched(n, m, i) != 0.0 || budget(n, m) <= 0.0) return false;
        const auto He = eg_.eves(n, m, i);
        return eg_.comm(n, m, k, i) > *std::max_element(He.begin(), He.end());
    }

    /// Scale-aware water level: marginal secrecy slope at an even split.
    void seed_theta(DualState& d) const {
        for (int n = 0; n < N_; ++n) {
            for (int m = 0; m < M_; ++m) {
                const double p = budget(n, m) * M_ / F_;
                double slope = 0.0;
                int count = 0;
                for (int k = 0; k < K_; ++k) {
                    for (int i = 0; i < F_; ++i) {
                        if (!usable(n, m, k, i)) continue;
                        slope += power_slope(d.alpha_row(k), 0.0, eg_.comm(n, m, k, i),
                                             eg_.eves(n, m, i), p);
                        ++count;
                    }
                }
                d.th(n, m) = count > 0 ? std::max(opts_.theta_min, slope / count) : 1.0;
            }
        }
    }

    /// Argmax scheduling of every (n, i); returns whether any assignment moved.
    bool schedule(const DualState& d) {
        bool changed = false;
        Eigen::MatrixXd scores(M_, K_);
        for (int n = 0; n < N_; ++n) {
            for (int i = 0; i < F_; ++i) {
                scores.setConstant(-std::numeric_limits<double>::infinity());
                for (int m = 0; m < M_; ++m) {
                    for (int k = 0; k < K_; ++k) {
                        if (!usable(n, m, k, i)) continue;
                        const double H = eg_.comm(n, m, k, i);
                        const auto He = eg_.eves(n, m, i);
                        const double p = optimal_power(d.alpha_row(k), d.th(n, m), H, He,
                                                       budget(n, m));
                        scores(m, k) = scheduling_metric(d.alpha_row(k), d.b(n, i),
                                                         d.ep(n, m, i), p, H, He);
                    }
                }
                const auto pick = select_assignment(scores);
                const int code = pick ? pick->first * K_ + pick->second : -1;
                changed |= code != assign_[n * F_ + i];
                assign_[n * F_ + i] = code;
            }
        }
        return changed;
    }

    /// Sets theta(n, m) so that the assigned powers exhaust the budget, then
    /// fills in those powers. The returned level is on the feasible side.
    void waterfill(DualState& d) {
        for (int n = 0; n < N_; ++n) {
            for (int m = 0; m < M_; ++m) waterfill(d, n, m);
        }
    }

    void waterfill(DualState& d, int n, int m) {
        std::vector<int> cells;
        for (int i = 0; i < F_; ++i) {
            const int code = assign_[n * F_ + i];
            if (code >= 0 && code / K_ == m) cells.push_back(i);
        }
        if (cells.empty()) return;
        const double cap = budget(n, m);
        auto total = [&](double theta) {
            double sum = 0.0;
            for (int i : cells) {
                const int k = assign_[n * F_ + i] % K_;
                sum += optimal_power(d.alpha_row(k), theta, eg_.comm(n, m, k, i),
                                     eg_.eves(n, m, i), cap);
            }
            return sum;
        };
        // bracket total(lo) > cap >= total(hi) around the current level
        double hi = std::max(d.th(n, m), opts_.theta_min);
        double lo = hi;
        if (total(opts_.theta_min) <= cap) {
            hi = opts_.theta_min;
        } else {
            if (total(hi) > cap) {
                while (total(hi) > cap) {
                    lo = hi;
                    hi *= 4.0;
                }
            } else {
                do {
                    hi = lo;
                    lo = std::max(opts_.theta_min, lo / 4.0);
                } while (total(lo) <= cap);
            }
            for (int it = 0; it < 100 && hi > lo * (1.0 + 1e-13); ++it) {
                const double mid = std::sqrt(lo * hi);
                (total(mid) > cap ? lo : hi) = mid;
            }
        }
        d.th(n, m) = hi;
        double used = 0.0;
        for (int i : cells) {
            const int k = assign_[n * F_ + i] % K_;
            power_[n * F_ + i] = optimal_power(d.alpha_row(k), hi, eg_.comm(n, m, k, i),
                                               eg_.eves(n, m, i), cap);
            used += power_[n * F_ + i];
        }
        // guard against rounding in the bisection
        if (used > cap) {
            for (int i : cells) power_[n * F_ + i] *= cap / used;
        }
    }

    void load(const AllocationState& st) {
        std::fill(assign_.begin(), assign_.end(), -1);
        std::fill(power_.begin(), power_.end(), 0.0);
        for (int n = 0; n < N_; ++n) {
            for (int m = 0; m < M_; ++m) {
                for (int k = 0; k < K_; ++k) {
                    for (int i = 0; i < F_; ++i) {
                        if (st.comm_tx(n, m, k, i) <= 0.0) continue;
                        assign_[n * F_ + i] = m * K_ + k;
                        power_[n * F_ + i] = st.power(n, m, k, i);
                    }
                }
            }
        }
    }

    /// Greedy reassignment of single subcarriers scored by `better` on the
    /// resulting state; powers of the touched (slot, uav) pairs are refilled
    /// under `d`. Returns whether anything changed.
    template <class Better>
    bool polish(DualState& d, Better&& better, int passes) {
        bool any = false;
        for (int pass = 0; pass < passes; ++pass) {
            bool moved = false;
            for (int n = 0; n < N_; ++n) {
                for (int i = 0; i < F_; ++i) {
                    const int cur = assign_[n * F_ + i];
                    for (int code = -1; code < M_ * K_; ++code) {
                        if (code == cur) continue;
                        if (code >= 0 && !usable(n, code / K_, code % K_, i)) continue;
                        const std::vector<int> keep_assign = assign_;
                        const std::vector<double> keep_power = power_;
                        const DualState keep_dual = d;
                        assign_[n * F_ + i] = code;
                        if (code < 0) power_[n * F_ + i] = 0.0;
                        if (cur >= 0) waterfill(d, n, cur / K_);
                        if (code >= 0) waterfill(d, n, code / K_);
                        if (better(state())) {
                            moved = any = true;
                            break;
                        }
                        assign_ = keep_assign;
                        power_ = keep_power;
                        d = keep_dual;
                    }
                }
            }
            if (!moved) break;
        }
        return any;
    }

    AllocationState state() const {
        AllocationState st = jam_;
        st.clear_communication();
        for (int n = 0; n < N_; ++n) {
            for (int i = 0; i < F_; ++i) {
                const int code = assign_[n * F_ + i];
                if (code < 0 || power_[n * F_ + i] <= 0.0) continue;
                st.sched(n, code / K_, code % K_, i) = 1.0;
                st.power(n, code / K_, code % K_, i) = power_[n * F_ + i];
            }
        }
        return st;
    }

    /// Per-(user, eve) average secrecy of the current primal, unclipped.
    std::vector<double> pair_values(int eves) const {
        std::vector<double> v(static_cast<std::size_t>(K_) * eves, 0.0);
        for (int n = 0; n < N_; ++n) {
            for (int i = 0; i < F_; ++i) {
                const int code = assign_[n * F_ + i];
                const double p = power_[n * F_ + i];
                if (code < 0 || p <= 0.0) continue;
                const int m = code / K_, k = code % K_;
                const double r = std::log2(1.0 + p * eg_.comm(n, m, k, i));
                const auto He = eg_.eves(n, m, i);
                for (int e = 0; e < eves; ++e) v[k * eves + e] += r - std::log2(1.0 + p * He[e]);
            }
        }
        for (double& x : v) x /= N_;
        return v;
    }

private:
    const AllocationState& jam_;
    const EffectiveGains& eg_;
    const Scenario& s_;
    const CommOptions& opts_;
    int N_, M_, K_, F_;
    std::vector<double> budget_;
    std::vector<int> assign_;  // per (n, i): m * K + k, or -1
    std::vector<double> power_;
};

bool same_shape(const DualState& d, const Scenario& s) {
    return d.users == s.num_users() && d.eves == pseudo_eves(s) && d.slots == s.num_slots &&
           d.uavs == s.num_uavs() && d.subcarriers == s.num_subcarriers;
}

}  // namespace

CommResult solve_comm(const AllocationState& jam, const TrajectorySet& traj, const Scenario& s,
                      const CommOptions& opts, const DualState* warm) {
    if (jam.slots() != s.num_slots || jam.uavs() != s.num_uavs() ||
        jam.users() != s.num_users() || jam.subcarriers() != s.num_subcarriers) {
        throw std::invalid_argument("solve_comm: allocation does not match scenario");
    }
    const LinkGains g(traj, s);
    const EffectiveGains eg(jam, g, s);
    CommPrimal primal(jam, eg, s, opts);

    CommResult result;
    DualState dual;
    if (warm && same_shape(*warm, s)) {
        dual = *warm;
    } else {
        dual = DualState::initial(s);
        primal.seed_theta(dual);
    }

    result.state = jam;
    result.state.clear_communication();
    result.eta = objective(result.state, g, s);
    result.dual = dual;
    // ties on eta (typically 0 when some user cannot be served) go to the
    // iterate serving the others best, which leaves jamming something to help
    auto total = [&](const AllocationState& st) {
        double sum = 0.0;
        for (double v : per_user_secrecy(st, g, s)) sum += v;
        return sum;
    };
    double result_total = 0.0;
    if (s.num_users() == 0) {
        result.converged = true;
        return result;
    }

    double best_pair_eta = -std::numeric_limits<double>::infinity();
    double best_dual = std::numeric_limits<double>::infinity();
    double prev_dual = std::numeric_limits<double>::quiet_NaN();
    int calm = 0;
    for (int l = 1; l <= opts.max_outer; ++l) {
        for (int j = 0; j < opts.max_inner; ++j) {
            const bool moved = primal.schedule(dual);
            primal.waterfill(dual);
            if (!moved && j > 0) break;
        }
        const AllocationState st = primal.state();
        const std::vector<double> pairs = primal.pair_values(dual.eves);
        const double pair_eta = *std::min_element(pairs.begin(), pairs.end());
        const double eta = objective(st, g, s);
        if (eta > result.eta || (eta == result.eta && total(st) > result_total)) {
            result.state = st;
            result.eta = eta;
            result_total = total(st);
        }
        result.dual = dual;
        result.iterations = l;
        best_pair_eta = std::max(best_pair_eta, pair_eta);

        double dual_value = 0.0, scale = 0.0;
        for (std::size_t j = 0; j < pairs.size(); ++j) {
            dual_value += dual.alpha[j] * pairs[j];
            scale = std::max(scale, std::abs(pairs[j]));
        }
        if (scale == 0.0) {  // nothing can be served securely
            result.converged = true;
            break;
        }
        best_dual = std::min(best_dual, dual_value);
        if (best_dual - best_pair_eta <= opts.tol * std::abs(best_dual)) {
            result.converged = true;
            break;
        }
        calm = std::abs(dual_value - prev_dual) <= opts.tol * std::abs(dual_value) ? calm + 1 : 0;
        prev_dual = dual_value;
        if (calm >= opts.patience) {
            result.converged = true;
            break;
        }

        std::vector<double> surplus(pairs.size());
        for (std::size_t j = 0; j < pairs.size(); ++j) surplus[j] = (pairs[j] - pair_eta) / scale;
        dual = update_multipliers(dual, st, s, surplus, l, opts);
    }

    // Subcarriers of one slot see identical gains, so the argmax schedule
    // gives all of them to one user; move single subcarriers between users
    // while the oracle objective improves.
    if (opts.polish_passes > 0 && s.num_users() > 1) {
        DualState flat = result.dual;
        std::fill(flat.alpha.begin(), flat.alpha.end(), 1.0 / flat.alpha.size());
        primal.load(result.state);
        primal.polish(flat, [&](const AllocationState& st) {
            const double eta = objective(st, g, s);
            const double sum = total(st);
            if (eta > result.eta * (1 + 1e-12) + 1e-15 ||
                (eta >= result.eta && sum > result_total * (1 + 1e-12) + 1e-15)) {
                result.state = st;
                result.eta = eta;
                result_total = sum;
                return true;
            }
            return false;
        }, opts.polish_passes);
    }
    return result;
}

}  // namespace uavsec
