#include "uavsec/convex_core.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace uavsec::cvx {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(Status s) {
    switch (s) {
        case Status::optimal: return "optimal";
        case Status::max_iter: return "max-iter";
        case Status::infeasible: return "infeasible";
        case Status::numerical_failure: return "numerical-failure";
    }
    return "unknown";
}

Expression& Expression::add_linear(Affine a) {
    Atom at;
    at.kind = AtomKind::linear;
    at.args.push_back(std::move(a));
    atoms.push_back(std::move(at));
    return *this;
}

Expression& Expression::add_log(Affine a, double weight) {
    if (!(weight >= 0.0)) throw std::invalid_argument("log atom needs a nonnegative weight");
    Atom at;
    at.kind = AtomKind::log;
    at.weight = weight;
    at.args.push_back(std::move(a));
    atoms.push_back(std::move(at));
    return *this;
}

Expression& Expression::add_neg_log_inv_sum(double offset,
                                             std::vector<std::pair<double, Affine>> terms,
                                             double weight) {
    if (!(weight >= 0.0) || !(offset >= 0.0))
        throw std::invalid_argument("inverse-sum atom needs nonnegative weight and offset");
    Atom at;
    at.kind = AtomKind::neg_log_inv_sum;
    at.weight = weight;
    at.offset = offset;
    for (auto& [c, a] : terms) {
        if (!(c >= 0.0)) throw std::invalid_argument("inverse-sum coefficients must be >= 0");
        at.coefs.push_back(c);
        at.args.push_back(std::move(a));
    }
    atoms.push_back(std::move(at));
    return *this;
}

Expression& Expression::add_neg_sq_norm(std::vector<Affine> rows, double weight) {
    if (!(weight >= 0.0)) throw std::invalid_argument("squared-norm atom needs weight >= 0");
    Atom at;
    at.kind = AtomKind::neg_sq_norm;
    at.weight = weight;
    at.args = std::move(rows);
    atoms.push_back(std::move(at));
    return *this;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double atom_value(const Atom& a, const VectorXd& x) {
    switch (a.kind) {
        case AtomKind::linear: return a.args[0].eval(x);
        case AtomKind::log: {
            const double y = a.args[0].eval(x);
            return y > 0.0 ? a.weight * std::log(y) : kNegInf;
        }
        case AtomKind::neg_log_inv_sum: {
            double u = a.offset;
            for (std::size_t j = 0; j < a.args.size(); ++j) {
                if (a.coefs[j] == 0.0) continue;
                const double y = a.args[j].eval(x);
                if (!(y > 0.0)) return kNegInf;
                u += a.coefs[j] / y;
            }
            return u > 0.0 ? -a.weight * std::log(u) : kNegInf;
        }
        case AtomKind::neg_sq_norm: {
            double s = 0.0;
            for (const auto& r : a.args) {
                const double v = r.eval(x);
                s += v * v;
            }
            return -a.weight * s;
        }
    }
    return kNegInf;
}

}  // namespace

double Expression::eval(const VectorXd& x) const {
    double v = constant;
    for (const auto& a : atoms) {
        v += atom_value(a, x);
        if (v == kNegInf) return v;
    }
    return v;
}

namespace {

// ---- compiled form -------------------------------------------------------

struct CArg {
    std::vector<int> loc;  // indices into CAtom::vars
    std::vector<double> coef;
    double constant = 0.0;
};

struct CAtom {
    AtomKind kind;
    double weight;
    double offset;
    std::vector<double> coefs;
    std::vector<CArg> args;
    std::vector<int> vars;  // global indices, unique
    std::vector<int> epos;  // position of vars[j] in the owning expression's support
};

struct CExpr {
    double constant = 0.0;
    std::vector<CAtom> atoms;
    std::vector<int> support;
    bool wide = false;
};

CExpr compile(const Expression& e, const std::vector<bool>& coupling, int wide_threshold) {
    CExpr c;
    c.constant = e.constant;
    std::unordered_map<int, int> spos;
    auto support_pos = [&](int v) {
        auto [it, fresh] = spos.emplace(v, static_cast<int>(c.support.size()));
        if (fresh) c.support.push_back(v);
        return it->second;
    };
    bool touches_coupling = false;
    for (const auto& a : e.atoms) {
        CAtom ca{a.kind, a.weight, a.offset, a.coefs, {}, {}, {}};
        std::unordered_map<int, int> apos;
        for (const auto& arg : a.args) {
            CArg carg;
            carg.constant = arg.constant;
            for (std::size_t j = 0; j < arg.idx.size(); ++j) {
                const int v = arg.idx[j];
                if (coupling[v]) {
                    if (a.kind != AtomKind::linear)
                        throw std::invalid_argument("coupling variables may only enter linear atoms");
                    touches_coupling = true;
                }
                auto [it, fresh] = apos.emplace(v, static_cast<int>(ca.vars.size()));
                if (fresh) {
                    ca.vars.push_back(v);
                    ca.epos.push_back(support_pos(v));
                }
                carg.loc.push_back(it->second);
                carg.coef.push_back(arg.coef[j]);
            }
            ca.args.push_back(std::move(carg));
        }
        c.atoms.push_back(std::move(ca));
    }
    c.wide = touches_coupling || static_cast<int>(c.support.size()) > wide_threshold;
    return c;
}

double arg_value(const CArg& a, const CAtom& at, const VectorXd& x) {
    double v = a.constant;
    for (std::size_t j = 0; j < a.loc.size(); ++j) v += a.coef[j] * x[at.vars[a.loc[j]]];
    return v;
}

// Value, gradient over at.vars and dense Hessian over at.vars (row-major).
// Returns false outside the domain.
bool atom_derivs(const CAtom& at, const VectorXd& x, double& val, std::vector<double>& g,
                 std::vector<double>& h, std::vector<double>& scratch) {
    const std::size_t nv = at.vars.size();
    g.assign(nv, 0.0);
    if (at.kind != AtomKind::linear) h.assign(nv * nv, 0.0);
    auto add_outer = [&](const CArg& a, const CArg& b, double s) {
        for (std::size_t p = 0; p < a.loc.size(); ++p)
            for (std::size_t q = 0; q < b.loc.size(); ++q)
                h[a.loc[p] * nv + b.loc[q]] += s * a.coef[p] * b.coef[q];
    };
    auto add_grad = [&](const CArg& a, double s) {
        for (std::size_t p = 0; p < a.loc.size(); ++p) g[a.loc[p]] += s * a.coef[p];
    };
    switch (at.kind) {
        case AtomKind::linear:
            val = arg_value(at.args[0], at, x);
            add_grad(at.args[0], 1.0);
            return true;
        case AtomKind::log: {
            const double y = arg_value(at.args[0], at, x);
            if (!(y > 0.0)) return false;
            val = at.weight * std::log(y);
            add_grad(at.args[0], at.weight / y);
            add_outer(at.args[0], at.args[0], -at.weight / (y * y));
            return true;
        }
        case AtomKind::neg_log_inv_sum: {
            const std::size_t na = at.args.size();
            scratch.assign(2 * na, 0.0);
            double* y = scratch.data();
            double* v = scratch.data() + na;
            double u = at.offset;
            for (std::size_t j = 0; j < na; ++j) {
                if (at.coefs[j] == 0.0) continue;
                y[j] = arg_value(at.args[j], at, x);
                if (!(y[j] > 0.0)) return false;
                u += at.coefs[j] / y[j];
            }
            if (!(u > 0.0)) return false;
            val = -at.weight * std::log(u);
            for (std::size_t j = 0; j < na; ++j) {
                if (at.coefs[j] == 0.0) continue;
                v[j] = at.coefs[j] / (y[j] * y[j] * u);
                add_grad(at.args[j], at.weight * v[j]);
            }
            // d2/dy2 = w (v v^T - 2 diag(v / y))
            for (std::size_t j = 0; j < na; ++j) {
                if (at.coefs[j] == 0.0) continue;
                for (std::size_t l = 0; l < na; ++l) {
                    if (at.coefs[l] == 0.0) continue;
                    double s = v[j] * v[l];
                    if (j == l) s -= 2.0 * v[j] / y[j];
                    add_outer(at.args[j], at.args[l], at.weight * s);
                }
            }
            return true;
        }
        case AtomKind::neg_sq_norm: {
            double s = 0.0;
            for (const auto& r : at.args) {
                const double rv = arg_value(r, at, x);
                s += rv * rv;
                add_grad(r, -2.0 * at.weight * rv);
                add_outer(r, r, -2.0 * at.weight);
            }
            val = -at.weight * s;
            return true;
        }
    }
    return false;
}

double expr_value(const CExpr& e, const VectorXd& x) {
    double v = e.constant;
    for (const auto& at : e.atoms) {
        double a = 0.0;
        switch (at.kind) {
            case AtomKind::linear: a = arg_value(at.args[0], at, x); break;
            case AtomKind::log: {
                const double y = arg_value(at.args[0], at, x);
                if (!(y > 0.0)) return kNegInf;
                a = at.weight * std::log(y);
                break;
            }
            case AtomKind::neg_log_inv_sum: {
                double u = at.offset;
                for (std::size_t j = 0; j < at.args.size(); ++j) {
                    if (at.coefs[j] == 0.0) continue;
                    const double y = arg_value(at.args[j], at, x);
                    if (!(y > 0.0)) return kNegInf;
                    u += at.coefs[j] / y;
                }
                if (!(u > 0.0)) return kNegInf;
                a = -at.weight * std::log(u);
                break;
            }
            case AtomKind::neg_sq_norm:
                for (const auto& r : at.args) {
                    const double rv = arg_value(r, at, x);
                    a -= at.weight * rv * rv;
                }
                break;
        }
        v += a;
    }
    return v;
}

// Records the emission sequence of Hessian entries once, then replays it into
// a fixed sparsity pattern on every Newton step.
class HessianAssembler {
public:
    explicit HessianAssembler(int n) : n_(n) {}

    void begin_values() {
        std::fill(mat_.valuePtr(), mat_.valuePtr() + mat_.nonZeros(), 0.0);
        cursor_ = 0;
    }
    void add(int r, int c, double v) {
        if (r < c) std::swap(r, c);
        if (recording_) {
            trip_.emplace_back(r, c, 0.0);
        } else {
            mat_.valuePtr()[slot_[cursor_++]] += v;
        }
    }
    void finish_pattern() {
        mat_.resize(n_, n_);
        mat_.setFromTriplets(trip_.begin(), trip_.end());
        mat_.makeCompressed();
        slot_.resize(trip_.size());
        for (std::size_t t = 0; t < trip_.size(); ++t) {
            const int r = trip_[t].row(), c = trip_[t].col();
            const int* begin = mat_.innerIndexPtr() + mat_.outerIndexPtr()[c];
            const int* end = mat_.innerIndexPtr() + mat_.outerIndexPtr()[c + 1];
            slot_[t] = static_cast<int>(std::lower_bound(begin, end, r) - mat_.innerIndexPtr());
        }
        trip_.clear();
        trip_.shrink_to_fit();
        recording_ = false;
    }
    bool recording() const { return recording_; }
    Eigen::SparseMatrix<double>& matrix() { return mat_; }
    const Eigen::SparseMatrix<double>& matrix() const { return mat_; }

private:
    int n_;
    bool recording_ = true;
    std::vector<Eigen::Triplet<double>> trip_;
    std::vector<int> slot_;
    std::size_t cursor_ = 0;
    Eigen::SparseMatrix<double> mat_;
};

struct Compiled {
    int n = 0;
    CExpr objective;
    std::vector<CExpr> cons;
    MatrixXd aeq;  // p x n
    VectorXd beq;  // aeq x + beq == 0
    std::vector<int> lindex;  // global -> sparse-block index, -1 for coupling vars
    std::vector<int> dvars;   // coupling variables
    int nl = 0;
};

Compiled compile_program(const Program& p, int wide_threshold) {
    Compiled c;
    c.n = p.num_vars;
    std::vector<bool> coupling = p.coupling;
    coupling.resize(p.num_vars, false);
    c.objective = compile(p.objective, coupling, wide_threshold);
    c.cons.reserve(p.constraints.size());
    for (const auto& e : p.constraints) c.cons.push_back(compile(e, coupling, wide_threshold));
    c.aeq = MatrixXd::Zero(static_cast<int>(p.equalities.size()), c.n);
    c.beq = VectorXd::Zero(static_cast<int>(p.equalities.size()));
    for (std::size_t r = 0; r < p.equalities.size(); ++r) {
        const auto& a = p.equalities[r];
        for (std::size_t j = 0; j < a.idx.size(); ++j) c.aeq(r, a.idx[j]) += a.coef[j];
        c.beq[r] = a.constant;
    }
    c.lindex.assign(c.n, -1);
    for (int v = 0; v < c.n; ++v) {
        if (coupling[v]) {
            c.dvars.push_back(v);
        } else {
            c.lindex[v] = c.nl++;
        }
    }
    return c;
}

struct Evaluation {
    double f = 0.0;
    VectorXd grad_f;
    std::vector<double> g;                 // constraint values
    std::vector<std::vector<double>> dg;   // gradients over each support
};

class BarrierSolver {
public:
    BarrierSolver(const Compiled& c, const Options& o) : c_(c), o_(o), hess_(c.nl) {}

    // Barrier value -f - mu sum log g; +inf outside the strict interior.
    double merit(const VectorXd& x, double mu) const {
        const double f = expr_value(c_.objective, x);
        if (!std::isfinite(f)) return std::numeric_limits<double>::infinity();
        double phi = -f;
        for (const auto& e : c_.cons) {
            const double g = expr_value(e, x);
            if (!(g > 0.0)) return std::numeric_limits<double>::infinity();
            phi -= mu * std::log(g);
        }
        return phi;
    }

    bool strictly_feasible(const VectorXd& x) const {
        return std::isfinite(merit(x, 1.0));
    }

    // Fills gradient of the merit and the Newton system for the current x.
    bool build(const VectorXd& x, double mu, VectorXd& grad) {
        const int n = c_.n;
        grad = VectorXd::Zero(n);
        if (hess_.recording()) {
            emit(x, mu, grad, /*values=*/false);
            hess_.finish_pattern();
            ldlt_.analyzePattern(hess_.matrix());
            grad.setZero();
        }
        hess_.begin_values();
        return emit(x, mu, grad, true);
    }

    // Solves H d = r using sparse LDLT on the local block, a Woodbury update
    // for the wide constraints and a dense Schur complement for coupling
    // variables.
    bool factor() {
        auto& S = hess_.matrix();
        double maxdiag = 0.0;
        for (int j = 0; j < S.outerSize(); ++j) maxdiag = std::max(maxdiag, S.coeff(j, j));
        const double abs_reg = 1e-14 * std::max(1.0, maxdiag);
        diag_reg_.resize(c_.nl);
        for (int j = 0; j < S.outerSize(); ++j) {
            double& d = S.coeffRef(j, j);
            diag_reg_[j] = 1e-12 * d + abs_reg;
            d += diag_reg_[j];
        }
        if (c_.nl > 0) {
            ldlt_.factorize(S);
            if (ldlt_.info() != Eigen::Success) return false;
            if ((ldlt_.vectorD().array() <= 0.0).any()) return false;
        }
        const int w = static_cast<int>(ucols_.size());
        const int nd = static_cast<int>(c_.dvars.size());
        UL_.resize(c_.nl, w);
        UD_.resize(nd, w);
        UL_.setZero();
        UD_.setZero();
        for (int k = 0; k < w; ++k) {
            for (const auto& [v, val] : ucols_[k]) {
                if (c_.lindex[v] >= 0) {
                    UL_(c_.lindex[v], k) += val;
                } else {
                    UD_(dpos_[v], k) += val;
                }
            }
        }
        Z_ = c_.nl > 0 ? MatrixXd(ldlt_.solve(UL_)) : MatrixXd(0, w);
        MatrixXd C = MatrixXd::Identity(w, w) + UL_.transpose() * Z_;
        cap_.compute(C);
        if (cap_.info() != Eigen::Success) return false;
        if (nd > 0) {
            MatrixXd schur = UD_ * cap_.solve(UD_.transpose());
            const double dreg = 1e-14 * std::max(1.0, schur.diagonal().cwiseAbs().maxCoeff());
            schur.diagonal().array() += dreg;
            schur_.compute(schur);
            if (schur_.info() != Eigen::Success) return false;
        }
        return true;
    }

    VectorXd apply_inverse(const VectorXd& r) const {
        const int nd = static_cast<int>(c_.dvars.size());
        VectorXd rl(c_.nl), rd(nd);
        for (int v = 0; v < c_.n; ++v) {
            if (c_.lindex[v] >= 0) {
                rl[c_.lindex[v]] = r[v];
            } else {
                rd[dpos_.at(v)] = r[v];
            }
        }
        VectorXd dd = VectorXd::Zero(nd);
        if (nd > 0) {
            const VectorXd rhs = rd - UD_ * cap_.solve(Z_.transpose() * rl);
            dd = schur_.solve(rhs);
        }
        VectorXd dl(c_.nl);
        if (c_.nl > 0) {
            const VectorXd v = rl - UL_ * (UD_.transpose() * dd);
            const VectorXd sv = ldlt_.solve(v);
            dl = sv - Z_ * cap_.solve(UL_.transpose() * sv);
        }
        VectorXd out(c_.n);
        for (int v = 0; v < c_.n; ++v)
            out[v] = c_.lindex[v] >= 0 ? dl[c_.lindex[v]] : dd[dpos_.at(v)];
        return out;
    }

    // Applies the unregularized Newton matrix.
    VectorXd apply_hessian(const VectorXd& d) const {
        VectorXd out = VectorXd::Zero(c_.n);
        if (c_.nl > 0) {
            VectorXd dl(c_.nl);
            for (int v = 0; v < c_.n; ++v)
                if (c_.lindex[v] >= 0) dl[c_.lindex[v]] = d[v];
            VectorXd hl = hess_.matrix().selfadjointView<Eigen::Lower>() * dl;
            hl -= diag_reg_.cwiseProduct(dl);
            for (int v = 0; v < c_.n; ++v)
                if (c_.lindex[v] >= 0) out[v] = hl[c_.lindex[v]];
        }
        for (const auto& col : ucols_) {
            double s = 0.0;
            for (const auto& [v, val] : col) s += val * d[v];
            for (const auto& [v, val] : col) out[v] += val * s;
        }
        return out;
    }

    VectorXd solve_newton(const VectorXd& rhs) const {
        VectorXd d = apply_inverse(rhs);
        for (int it = 0; it < 2; ++it) {
            const VectorXd res = rhs - apply_hessian(d);
            d += apply_inverse(res);
        }
        return d;
    }

    // Newton direction restricted to the null space of the equalities.
    VectorXd direction(const VectorXd& grad) const {
        VectorXd d = solve_newton(-grad);
        if (c_.aeq.rows() == 0) return d;
        MatrixXd Y(c_.n, c_.aeq.rows());
        for (int r = 0; r < c_.aeq.rows(); ++r) Y.col(r) = solve_newton(c_.aeq.row(r).transpose());
        const MatrixXd K = c_.aeq * Y;
        const VectorXd nu = K.completeOrthogonalDecomposition().solve(c_.aeq * d);
        return d - Y * nu;
    }

    void set_dpos() {
        for (std::size_t d = 0; d < c_.dvars.size(); ++d) dpos_[c_.dvars[d]] = static_cast<int>(d);
    }

    // Last evaluated constraint data, kept for the KKT report.
    std::vector<double> last_g;
    std::vector<std::vector<double>> last_dg;
    VectorXd last_grad_f;

private:
    bool emit(const VectorXd& x, double mu, VectorXd& grad, bool values) {
        std::vector<double>& ga = ga_;
        std::vector<double>& ha = ha_;
        std::vector<double>& scratch = scratch_;
        ucols_.clear();
        last_g.assign(c_.cons.size(), 0.0);
        last_dg.resize(c_.cons.size());
        // objective enters with a minus sign
        {
            std::vector<double> ge(c_.objective.support.size(), 0.0);
            for (const auto& at : c_.objective.atoms) {
                double val = 0.0;
                if (!atom_derivs(at, x, val, ga, ha, scratch)) return false;
                for (std::size_t j = 0; j < at.vars.size(); ++j) ge[at.epos[j]] += ga[j];
                emit_atom_hessian(at, ha.data(), -1.0);
            }
            last_grad_f = VectorXd::Zero(c_.n);
            for (std::size_t j = 0; j < ge.size(); ++j) {
                last_grad_f[c_.objective.support[j]] += ge[j];
                grad[c_.objective.support[j]] -= ge[j];
            }
        }
        for (std::size_t k = 0; k < c_.cons.size(); ++k) {
            const CExpr& e = c_.cons[k];
            std::vector<double>& ge = last_dg[k];
            ge.assign(e.support.size(), 0.0);
            double gval = e.constant;
            // Atom Hessians need 1/g, which is only known after the sweep, so
            // keep them in a small buffer.
            hbuf_.clear();
            hflat_.clear();
            for (std::size_t a = 0; a < e.atoms.size(); ++a) {
                const auto& at = e.atoms[a];
                double val = 0.0;
                if (!atom_derivs(at, x, val, ga, ha, scratch)) return false;
                gval += val;
                for (std::size_t j = 0; j < at.vars.size(); ++j) ge[at.epos[j]] += ga[j];
                if (at.kind != AtomKind::linear) {
                    hbuf_.emplace_back(a, hflat_.size());
                    hflat_.insert(hflat_.end(), ha.begin(), ha.end());
                }
            }
            if (values && !(gval > 0.0)) return false;
            last_g[k] = gval;
            const double inv = values ? 1.0 / gval : 1.0;
            for (const auto& [a, off] : hbuf_) emit_atom_hessian(e.atoms[a], hflat_.data() + off, -mu * inv);
            for (std::size_t j = 0; j < ge.size(); ++j) grad[e.support[j]] -= mu * inv * ge[j];
            if (e.wide) {
                std::vector<std::pair<int, double>> col;
                col.reserve(ge.size());
                const double s = std::sqrt(mu) * inv;
                for (std::size_t j = 0; j < ge.size(); ++j) col.emplace_back(e.support[j], s * ge[j]);
                ucols_.push_back(std::move(col));
            } else {
                const double s = mu * inv * inv;
                for (std::size_t a = 0; a < ge.size(); ++a) {
                    const int ra = c_.lindex[e.support[a]];
                    for (std::size_t b = a; b < ge.size(); ++b)
                        hess_.add(ra, c_.lindex[e.support[b]], s * ge[a] * ge[b]);
                }
            }
        }
        for (int j = 0; j < c_.nl; ++j) hess_.add(j, j, 0.0);
        return true;
    }

    void emit_atom_hessian(const CAtom& at, const double* h, double scale) {
        if (at.kind == AtomKind::linear) return;
        const std::size_t nv = at.vars.size();
        for (std::size_t a = 0; a < nv; ++a) {
            const int ra = c_.lindex[at.vars[a]];
            for (std::size_t b = a; b < nv; ++b)
                hess_.add(ra, c_.lindex[at.vars[b]], scale * h[a * nv + b]);
        }
    }

    const Compiled& c_;
    Options o_;
    HessianAssembler hess_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> ldlt_;
    std::vector<std::vector<std::pair<int, double>>> ucols_;
    std::vector<std::pair<std::size_t, std::size_t>> hbuf_;
    std::vector<double> hflat_, ga_, ha_, scratch_;
    std::unordered_map<int, int> dpos_;
    VectorXd diag_reg_;
    MatrixXd UL_, UD_, Z_;
    Eigen::LDLT<MatrixXd> cap_, schur_;
};

struct CoreResult {
    VectorXd x;
    Status status = Status::numerical_failure;
    int iterations = 0;
    double mu = 0.0;
    bool stopped_early = false;
};

CoreResult barrier_core(const Compiled& c, VectorXd x, const Options& o,
                        const std::function<bool(const VectorXd&)>& stop) {
    CoreResult res;
    BarrierSolver bs(c, o);
    bs.set_dpos();
    double mu = o.mu0;
    const double mu_end = o.tol / 10.0;
    const double center_tol = 0.1 * o.tol;
    int iters = 0;
    VectorXd grad;
    for (;;) {
        bool centered = false;
        while (!centered) {
            if (iters >= o.max_iter) {
                res.x = x;
                res.status = Status::max_iter;
                res.iterations = iters;
                res.mu = mu;
                return res;
            }
            if (!bs.build(x, mu, grad) || !bs.factor()) {
                res.x = x;
                res.status = Status::numerical_failure;
                res.iterations = iters;
                res.mu = mu;
                return res;
            }
            const VectorXd dx = bs.direction(grad);
            const double dec = -grad.dot(dx);
            if (!(dec >= -1e-12) || !std::isfinite(dec)) {
                res.x = x;
                res.status = Status::numerical_failure;
                res.iterations = iters;
                res.mu = mu;
                return res;
            }
            if (dec / 2.0 <= center_tol) {
                centered = true;
                break;
            }
            const double phi0 = bs.merit(x, mu);
            double t = 1.0;
            VectorXd xn = x + dx;
            double phi = bs.merit(xn, mu);
            int halvings = 0;
            while (!(phi <= phi0 - 0.01 * t * dec) && halvings < 80) {
                t *= 0.5;
                xn = x + t * dx;
                phi = bs.merit(xn, mu);
                ++halvings;
            }
            ++iters;
            if (!(phi <= phi0 - 0.01 * t * dec)) {
                // Armijo lost to rounding: accept as centered if the decrement
                // is already tiny relative to the merit, otherwise give up.
                if (dec <= 1e-9 * (1.0 + std::abs(phi0))) {
                    centered = true;
                    break;
                }
                res.x = x;
                res.status = Status::numerical_failure;
                res.iterations = iters;
                res.mu = mu;
                return res;
            }
            x = xn;
            if (stop && stop(x)) {
                res.x = x;
                res.status = Status::optimal;
                res.iterations = iters;
                res.mu = mu;
                res.stopped_early = true;
                return res;
            }
        }
        if (mu < mu_end) break;
        mu /= o.mu_factor;
    }
    res.x = x;
    res.status = Status::optimal;
    res.iterations = iters;
    res.mu = mu;
    return res;
}

Expression linear_expr(const Affine& a) {
    Expression e;
    e.add_linear(a);
    return e;
}

// Affine arguments whose positivity defines the domain of the log atoms.
void collect_domain(const Expression& e, std::vector<Expression>& out) {
    for (const auto& at : e.atoms) {
        if (at.kind == AtomKind::log) {
            out.push_back(linear_expr(at.args[0]));
        } else if (at.kind == AtomKind::neg_log_inv_sum) {
            for (std::size_t j = 0; j < at.args.size(); ++j)
                if (at.coefs[j] > 0.0) out.push_back(linear_expr(at.args[j]));
        }
    }
}

bool has_log(const Expression& e) {
    return std::any_of(e.atoms.begin(), e.atoms.end(), [](const Atom& a) {
        return a.kind == AtomKind::log || a.kind == AtomKind::neg_log_inv_sum;
    });
}

// Finds a point strictly satisfying every expression in `cons`, each of which
// must be finite at x0. Returns false when the set appears empty.
bool phase_one(const Program& p, const std::vector<Expression>& cons, VectorXd& x,
               const Options& o, int& iterations) {
    std::vector<double> vals(cons.size());
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cons.size(); ++k) {
        vals[k] = cons[k].eval(x);
        worst = std::min(worst, vals[k]);
    }
    if (cons.empty() || worst > 0.0) return true;

    Program q;
    q.num_vars = p.num_vars;
    q.coupling = p.coupling;
    q.coupling.resize(p.num_vars, false);
    q.equalities = p.equalities;
    const int s = q.add_var(true);
    q.objective.add_linear(Affine().add(s, -1.0));
    // scale of the violation, used to stop once a comfortable margin exists
    const double scale = std::max(1.0, -worst);
    for (std::size_t k = 0; k < cons.size(); ++k) {
        Expression e = cons[k];
        if (vals[k] <= 1e-9 * scale) e.add_linear(Affine().add(s, 1.0));
        q.constraints.push_back(std::move(e));
    }
    q.constraints.push_back(linear_expr(Affine(scale).add(s, 1.0)));  // s >= -scale

    VectorXd z(q.num_vars);
    z.head(p.num_vars) = x;
    z[s] = -worst + 1.0;
    Options o1 = o;
    o1.tol = std::max(o.tol, 1e-10);
    const double margin = 1e-6 * scale;
    const Compiled c = compile_program(q, o.wide_threshold);
    auto r = barrier_core(c, z, o1, [&](const VectorXd& v) { return v[s] < -margin; });
    iterations += r.iterations;
    x = r.x.head(p.num_vars);
    return r.x[s] < 0.0;
}

}  // namespace

Solution solve(const Program& p, const Options& opts) {
    return solve(p, VectorXd::Zero(p.num_vars), opts);
}

Solution solve(const Program& p, const VectorXd& x0, const Options& opts) {
    if (x0.size() != p.num_vars) throw std::invalid_argument("start point has wrong dimension");
    Solution sol;
    VectorXd x = x0;
    if (!x.allFinite()) throw std::invalid_argument("start point is not finite");

    // project onto the equality set
    if (!p.equalities.empty()) {
        MatrixXd A = MatrixXd::Zero(static_cast<int>(p.equalities.size()), p.num_vars);
        VectorXd r(A.rows());
        for (int i = 0; i < A.rows(); ++i) {
            const auto& a = p.equalities[i];
            for (std::size_t j = 0; j < a.idx.size(); ++j) A(i, a.idx[j]) += a.coef[j];
            r[i] = a.eval(x);
        }
        const VectorXd y = (A * A.transpose()).completeOrthogonalDecomposition().solve(r);
        x -= A.transpose() * y;
        double viol = 0.0;
        for (const auto& a : p.equalities) viol = std::max(viol, std::abs(a.eval(x)));
        if (viol > 1e-8 * (1.0 + x.cwiseAbs().maxCoeff())) {
            sol.x = x;
            sol.status = Status::infeasible;
            sol.feasibility = viol;
            return sol;
        }
    }

    int iterations = 0;
    // Stage A: domain of every log atom plus the constraints that are
    // defined everywhere.
    std::vector<Expression> stage_a;
    collect_domain(p.objective, stage_a);
    for (const auto& e : p.constraints) {
        collect_domain(e, stage_a);
        if (!has_log(e)) stage_a.push_back(e);
    }
    if (!phase_one(p, stage_a, x, opts, iterations)) {
        sol.x = x;
        sol.status = Status::infeasible;
        sol.iterations = iterations;
        return sol;
    }
    // Stage B: everything, keeping the objective's domain.
    std::vector<Expression> stage_b;
    collect_domain(p.objective, stage_b);
    for (const auto& e : p.constraints) stage_b.push_back(e);
    if (!phase_one(p, stage_b, x, opts, iterations)) {
        sol.x = x;
        sol.status = Status::infeasible;
        sol.iterations = iterations;
        return sol;
    }

    const Compiled c = compile_program(p, opts.wide_threshold);
    auto r = barrier_core(c, x, opts, nullptr);
    sol.x = r.x;
    sol.status = r.status;
    sol.iterations = iterations + r.iterations;
    sol.objective = p.objective.eval(r.x);

    // KKT report at the final barrier point, lambda_k = mu / g_k.
    VectorXd grad_f = VectorXd::Zero(p.num_vars);
    {
        BarrierSolver bs(c, opts);
        bs.set_dpos();
        VectorXd g;
        if (bs.build(r.x, r.mu, g)) {
            VectorXd resid = bs.last_grad_f;
            double scale = 1.0 + bs.last_grad_f.cwiseAbs().maxCoeff();
            double comp = 0.0, feas = 0.0;
            for (std::size_t k = 0; k < c.cons.size(); ++k) {
                const double lam = r.mu / bs.last_g[k];
                comp = std::max(comp, lam * bs.last_g[k]);
                feas = std::max(feas, -bs.last_g[k]);
                for (std::size_t j = 0; j < c.cons[k].support.size(); ++j) {
                    const double t = lam * bs.last_dg[k][j];
                    resid[c.cons[k].support[j]] += t;
                    scale = std::max(scale, std::abs(t));
                }
            }
            if (c.aeq.rows() > 0) {
                const VectorXd nu = c.aeq.transpose().completeOrthogonalDecomposition().solve(-resid);
                resid += c.aeq.transpose() * nu;
                for (int i = 0; i < c.aeq.rows(); ++i)
                    feas = std::max(feas, std::abs(c.aeq.row(i).dot(r.x) + c.beq[i]));
            }
            sol.stationarity = resid.cwiseAbs().maxCoeff() / scale;
            sol.complementarity = comp;
            sol.feasibility = feas;
        }
    }
    return sol;
}

}  // namespace uavsec::cvx
