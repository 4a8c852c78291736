#pragma once

#include <Eigen/Core>

#include <string>
#include <utility>
#include <vector>

namespace uavsec::cvx {

/// Sparse affine form sum_j coef[j] * x[idx[j]] + constant.
struct Affine {
    std::vector<int> idx;
    std::vector<double> coef;
    double constant = 0.0;

    Affine() = default;
    explicit Affine(double c) : constant(c) {}

    Affine& add(int var, double c) {
        idx.push_back(var);
        coef.push_back(c);
        return *this;
    }
    double eval(const Eigen::VectorXd& x) const {
        double v = constant;
        for (std::size_t j = 0; j < idx.size(); ++j) v += coef[j] * x[idx[j]];
        return v;
    }
};

enum class AtomKind {
    linear,           // a(x)
    log,              // w log(a(x))
    neg_log_inv_sum,  // -w log(c0 + sum_j c_j / a_j(x))
    neg_sq_norm,      // -w sum_r a_r(x)^2
};

struct Atom {
    AtomKind kind = AtomKind::linear;
    double weight = 1.0;
    std::vector<Affine> args;
    std::vector<double> coefs;  // c_j of neg_log_inv_sum
    double offset = 0.0;        // c0 of neg_log_inv_sum
};

/// Concave function built as a sum of atoms plus a constant.
struct Expression {
    std::vector<Atom> atoms;
    double constant = 0.0;

    Expression& add_linear(Affine a);
    Expression& add_log(Affine a, double weight = 1.0);
    Expression& add_neg_log_inv_sum(double offset, std::vector<std::pair<double, Affine>> terms,
                                    double weight = 1.0);
    Expression& add_neg_sq_norm(std::vector<Affine> rows, double weight = 1.0);
    Expression& add_constant(double c) {
        constant += c;
        return *this;
    }

    /// Value at x; -infinity outside the domain of a log atom.
    double eval(const Eigen::VectorXd& x) const;
};

/// maximize objective(x) s.t. constraints[k](x) >= 0, equalities[e](x) == 0.
struct Program {
    int num_vars = 0;
    Expression objective;
    std::vector<Expression> constraints;
    std::vector<Affine> equalities;
    /// Variables that only enter linear atoms but couple many constraints
    /// (an epigraph variable, typically). Their constraints are handled by a
    /// low-rank update instead of the sparse factorization.
    std::vector<bool> coupling;

    int add_var(bool is_coupling = false) {
        coupling.push_back(is_coupling);
        return num_vars++;
    }
    /// lo <= x[var]
    void add_lower_bound(int var, double lo) { constraints.emplace_back().add_linear(Affine(-lo).add(var, 1.0)); }
    /// x[var] <= hi
    void add_upper_bound(int var, double hi) { constraints.emplace_back().add_linear(Affine(hi).add(var, -1.0)); }
};

struct Options {
    double tol = 1e-8;
    int max_iter = 400;       // total Newton steps over all barrier stages
    double mu0 = 1.0;
    double mu_factor = 10.0;
    int wide_threshold = 64;  // constraints touching more variables use the low-rank path
};

enum class Status { optimal, max_iter, infeasible, numerical_failure };

std::string to_string(Status s);

struct Solution {
    Eigen::VectorXd x;
    double objective = 0.0;
    Status status = Status::numerical_failure;
    int iterations = 0;
    double stationarity = 0.0;     // relative, infinity norm
    double feasibility = 0.0;      // max constraint / equality violation
    double complementarity = 0.0;  // max lambda_k * g_k
};

/// Primal log-barrier interior-point solve. If x0 is not strictly feasible a
/// phase-1 problem is solved first.
Solution solve(const Program& p, const Eigen::VectorXd& x0, const Options& opts = {});
Solution solve(const Program& p, const Options& opts = {});

}  // namespace uavsec::cvx
