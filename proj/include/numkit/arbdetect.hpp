#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "lp.hpp"
#include "model.hpp"

namespace numkit {

enum class StepVerdict { clean, immediate_arbitrage, indeterminate };

struct StepArbitrage {
    StepVerdict verdict = StepVerdict::clean;
    Eigen::MatrixXd null_basis;              // columns: orthonormal basis of N
    std::optional<Eigen::VectorXd> certificate;  // |v|_inf <= 1 when present
    double slack = 0.0;
};

struct ArbitrageReport {
    std::vector<StepArbitrage> steps;
    bool clean() const {
        for (const auto& s : steps)
            if (s.verdict != StepVerdict::clean) return false;
        return true;
    }
    bool indeterminate() const {
        for (const auto& s : steps)
            if (s.verdict == StepVerdict::indeterminate) return true;
        return false;
    }
};

namespace detail {

// Stack of the defining rows of N: every atom x_i, the diffusion matrix,
// and the drift.
inline Eigen::MatrixXd constraint_stack(const LocalTriplet& tr) {
    const Eigen::Index d = tr.dimension();
    const Eigen::Index n = static_cast<Eigen::Index>(tr.jumps.atoms.size());
    Eigen::MatrixXd stack(n + d + 1, d);
    for (Eigen::Index i = 0; i < n; ++i)
        stack.row(i) = tr.jumps.atoms[static_cast<std::size_t>(i)].x.transpose();
    stack.middleRows(n, d) = tr.c;
    stack.row(n + d) = tr.b.transpose();
    return stack;
}

// Orthonormal basis of the range of c, eigenvalue cutoff 1e-10.
inline Eigen::MatrixXd diffusion_range(const Eigen::MatrixXd& c) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < c.rows(); ++i)
        if (es.eigenvalues()(i) > 1e-10) keep.push_back(i);
    Eigen::MatrixXd range(c.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) range.col(static_cast<Eigen::Index>(j)) = es.eigenvectors().col(keep[j]);
    return range;
}

}  // namespace detail

// Orthonormal basis (columns) of the null-investment subspace
// N = {v : v.x_i = 0 for all atoms, cv = 0, v.b = 0}.
inline Eigen::MatrixXd null_investments(const LocalTriplet& tr) {
    const Eigen::Index d = tr.dimension();
    Eigen::MatrixXd stack = detail::constraint_stack(tr);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(stack, Eigen::ComputeFullV);
    double cutoff = 1e-10 * std::max(1.0, svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > cutoff) ++rank;
    return svd.matrixV().rightCols(d - rank);
}

// Orthonormal basis of the complement N-perp, where the optimization lives.
inline Eigen::MatrixXd null_complement(const LocalTriplet& tr) {
    const Eigen::Index d = tr.dimension();
    Eigen::MatrixXd stack = detail::constraint_stack(tr);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(stack, Eigen::ComputeFullV);
    double cutoff = 1e-10 * std::max(1.0, svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > cutoff) ++rank;
    (void)d;
    return svd.matrixV().leftCols(rank);
}

// Immediate-arbitrage detection. Members of I satisfy v.x_i >= 0 for all
// atoms, cv = 0, v.b >= K(vx), and are not null investments. Nontriviality is
// a disjunction of two strict inequalities, covered by two LPs over the
// feasibility cone boxed to |v|_inf <= 1:
//   LP-A: maximize v.b - sum_i k_i v.x_i   (strict residual drift)
//   LP-B: maximize sum_i k_i v.x_i         (strictly positive jump)
inline StepArbitrage detect_immediate_arbitrage(const LocalTriplet& tr, double tol = 1e-9) {
    const Eigen::Index d = tr.dimension();
    const auto& atoms = tr.jumps.atoms;
    StepArbitrage out;
    out.null_basis = null_investments(tr);

    Eigen::VectorXd compensator = Eigen::VectorXd::Zero(d);
    for (const auto& a : atoms) compensator += a.k * a.x;

    Eigen::MatrixXd range = detail::diffusion_range(tr.c);
    const Eigen::Index n = static_cast<Eigen::Index>(atoms.size());
    const Eigen::Index n_ub = n + 1 + 2 * d;

    LpProblem p;
    p.a_ub.setZero(n_ub, d);
    p.b_ub.setZero(n_ub);
    for (Eigen::Index i = 0; i < n; ++i)
        p.a_ub.row(i) = -atoms[static_cast<std::size_t>(i)].x.transpose();  // v.x_i >= 0
    p.a_ub.row(n) = (compensator - tr.b).transpose();  // v.b - K(vx) >= 0
    for (Eigen::Index j = 0; j < d; ++j) {             // box |v|_inf <= 1
        p.a_ub(n + 1 + 2 * j, j) = 1.0;
        p.b_ub(n + 1 + 2 * j) = 1.0;
        p.a_ub(n + 2 + 2 * j, j) = -1.0;
        p.b_ub(n + 2 + 2 * j) = 1.0;
    }
    p.a_eq = range.transpose();  // cv = 0 imposed on the range of c
    p.b_eq.setZero(range.cols());

    double best = 0.0;
    std::optional<Eigen::VectorXd> best_v;
    bool failed = false;
    for (int which = 0; which < 2; ++which) {
        p.objective = which == 0 ? (tr.b - compensator).eval() : compensator;
        LpSolution sol = solve_lp(p);
        if (sol.status != LpStatus::optimal) {
            failed = true;
            continue;
        }
        if (sol.objective > best) {
            best = sol.objective;
            best_v = sol.x;
        }
    }
    if (best > tol) {
        out.verdict = StepVerdict::immediate_arbitrage;
        out.certificate = best_v;
        out.slack = best;
    } else if (failed) {
        out.verdict = StepVerdict::indeterminate;
    } else {
        out.verdict = StepVerdict::clean;
    }
    return out;
}

inline ArbitrageReport scan_model(const MarketModel& model, double tol = 1e-9) {
    ArbitrageReport report;
    report.steps.reserve(model.n_steps());
    for (const auto& tr : model.triplets) report.steps.push_back(detect_immediate_arbitrage(tr, tol));
    return report;
}

}  // namespace numkit
