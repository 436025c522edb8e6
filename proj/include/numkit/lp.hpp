#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

namespace numkit {

// Dense two-phase simplex for the small feasibility/certificate programs in
// this library (a handful of variables, a handful of rows). Maximizes
// objective . x subject to a_ub x <= b_ub and a_eq x = b_eq. Variables are
// free unless flagged nonnegative.
enum class LpStatus { optimal, infeasible, unbounded, numerical_failure };

struct LpProblem {
    Eigen::VectorXd objective;
    Eigen::MatrixXd a_ub;
    Eigen::VectorXd b_ub;
    Eigen::MatrixXd a_eq;
    Eigen::VectorXd b_eq;
    std::vector<bool> nonneg;  // empty = all free
};

struct LpSolution {
    LpStatus status = LpStatus::numerical_failure;
    Eigen::VectorXd x;
    double objective = 0.0;
};

namespace detail {

// Bland's rule tableau simplex on: max c.y, A y = b, y >= 0, b >= 0 given a
// starting basis. Returns false on iteration blow-up.
inline bool simplex_core(Eigen::MatrixXd& tab, std::vector<std::ptrdiff_t>& basis,
                         std::ptrdiff_t ncols, bool& unbounded) {
    const double tol = 1e-11;
    const std::ptrdiff_t nrows = tab.rows() - 1;  // last row is the objective
    const std::ptrdiff_t rhs = tab.cols() - 1;    // last column is the rhs
    unbounded = false;
    for (long iter = 0; iter < 20000; ++iter) {
        std::ptrdiff_t enter = -1;
        for (std::ptrdiff_t j = 0; j < ncols; ++j) {
            if (tab(nrows, j) > tol) {
                enter = j;
                break;
            }
        }
        if (enter < 0) return true;  // optimal
        std::ptrdiff_t leave = -1;
        double best_ratio = 0.0;
        for (std::ptrdiff_t i = 0; i < nrows; ++i) {
            double a = tab(i, enter);
            if (a > tol) {
                double ratio = tab(i, rhs) / a;
                if (leave < 0 || ratio < best_ratio - tol ||
                    (ratio < best_ratio + tol && basis[static_cast<std::size_t>(i)] <
                                                     basis[static_cast<std::size_t>(leave)])) {
                    leave = i;
                    best_ratio = ratio;
                }
            }
        }
        if (leave < 0) {
            unbounded = true;
            return true;
        }
        double piv = tab(leave, enter);
        tab.row(leave) /= piv;
        for (std::ptrdiff_t i = 0; i <= nrows; ++i) {
            if (i == leave) continue;
            double f = tab(i, enter);
            if (f != 0.0) tab.row(i) -= f * tab.row(leave);
        }
        basis[static_cast<std::size_t>(leave)] = enter;
    }
    return false;
}

}  // namespace detail

inline LpSolution solve_lp(const LpProblem& p) {
    const double tol = 1e-9;
    const std::ptrdiff_t nvar = p.objective.size();
    const std::ptrdiff_t n_ub = p.b_ub.size();
    const std::ptrdiff_t n_eq = p.b_eq.size();
    const std::ptrdiff_t nrows = n_ub + n_eq;

    // Expanded columns: nonnegative vars map to one column, free vars to a
    // (+,-) pair.
    std::vector<std::ptrdiff_t> col_of(static_cast<std::size_t>(nvar));
    std::vector<bool> split(static_cast<std::size_t>(nvar));
    std::ptrdiff_t nexp = 0;
    for (std::ptrdiff_t j = 0; j < nvar; ++j) {
        bool nn = j < static_cast<std::ptrdiff_t>(p.nonneg.size()) &&
                  p.nonneg[static_cast<std::size_t>(j)];
        col_of[static_cast<std::size_t>(j)] = nexp;
        split[static_cast<std::size_t>(j)] = !nn;
        nexp += nn ? 1 : 2;
    }
    const std::ptrdiff_t nslack = n_ub;
    const std::ptrdiff_t nstruct = nexp + nslack;
    const std::ptrdiff_t ncols = nstruct + nrows;  // + artificials (worst case)

    Eigen::MatrixXd tab = Eigen::MatrixXd::Zero(nrows + 1, ncols + 1);
    auto fill_row = [&](std::ptrdiff_t r, const Eigen::VectorXd& row, double rhs) {
        for (std::ptrdiff_t j = 0; j < nvar; ++j) {
            std::ptrdiff_t c = col_of[static_cast<std::size_t>(j)];
            tab(r, c) = row(j);
            if (split[static_cast<std::size_t>(j)]) tab(r, c + 1) = -row(j);
        }
        tab(r, ncols) = rhs;
    };
    for (std::ptrdiff_t i = 0; i < n_ub; ++i) {
        fill_row(i, p.a_ub.row(i), p.b_ub(i));
        tab(i, nexp + i) = 1.0;
    }
    for (std::ptrdiff_t i = 0; i < n_eq; ++i) fill_row(n_ub + i, p.a_eq.row(i), p.b_eq(i));
    for (std::ptrdiff_t i = 0; i < nrows; ++i) {
        if (tab(i, ncols) < 0.0) tab.row(i) = -tab.row(i);
    }

    // Phase 1 basis: slack where usable, artificial otherwise.
    std::vector<std::ptrdiff_t> basis(static_cast<std::size_t>(nrows), -1);
    std::ptrdiff_t nart = 0;
    for (std::ptrdiff_t i = 0; i < nrows; ++i) {
        if (i < n_ub && tab(i, nexp + i) > 0.5) {
            basis[static_cast<std::size_t>(i)] = nexp + i;
        } else {
            std::ptrdiff_t a = nstruct + nart++;
            tab(i, a) = 1.0;
            basis[static_cast<std::size_t>(i)] = a;
        }
    }
    const std::ptrdiff_t used_cols = nstruct + nart;
    if (nart > 0) {
        // Phase 1 objective: maximize -(sum of artificials).
        for (std::ptrdiff_t i = 0; i < nrows; ++i) {
            if (basis[static_cast<std::size_t>(i)] >= nstruct) tab.row(nrows) += tab.row(i);
        }
        for (std::ptrdiff_t j = nstruct; j < used_cols; ++j) tab(nrows, j) = 0.0;
        bool unbounded = false;
        if (!detail::simplex_core(tab, basis, used_cols, unbounded))
            return {LpStatus::numerical_failure, {}, 0.0};
        if (tab(nrows, ncols) > tol) return {LpStatus::infeasible, {}, 0.0};
        // Pivot remaining artificials out of the basis where possible.
        for (std::ptrdiff_t i = 0; i < nrows; ++i) {
            if (basis[static_cast<std::size_t>(i)] < nstruct) continue;
            std::ptrdiff_t enter = -1;
            for (std::ptrdiff_t j = 0; j < nstruct; ++j) {
                if (std::abs(tab(i, j)) > 1e-9) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) continue;  // redundant row
            double piv = tab(i, enter);
            tab.row(i) /= piv;
            for (std::ptrdiff_t r = 0; r <= nrows; ++r) {
                if (r == i) continue;
                double f = tab(r, enter);
                if (f != 0.0) tab.row(r) -= f * tab.row(i);
            }
            basis[static_cast<std::size_t>(i)] = enter;
        }
    }

    // Phase 2 objective row (artificial columns pinned at zero).
    tab.row(nrows).setZero();
    for (std::ptrdiff_t j = 0; j < nvar; ++j) {
        std::ptrdiff_t c = col_of[static_cast<std::size_t>(j)];
        tab(nrows, c) = p.objective(j);
        if (split[static_cast<std::size_t>(j)]) tab(nrows, c + 1) = -p.objective(j);
    }
    for (std::ptrdiff_t i = 0; i < nrows; ++i) {
        std::ptrdiff_t bj = basis[static_cast<std::size_t>(i)];
        double f = tab(nrows, bj);
        if (f != 0.0) tab.row(nrows) -= f * tab.row(i);
    }
    for (std::ptrdiff_t j = nstruct; j < used_cols; ++j) {
        if (tab(nrows, j) > 0.0) tab(nrows, j) = 0.0;  // never re-enter artificials
    }
    bool unbounded = false;
    if (!detail::simplex_core(tab, basis, nstruct, unbounded))
        return {LpStatus::numerical_failure, {}, 0.0};
    if (unbounded) return {LpStatus::unbounded, {}, 0.0};

    Eigen::VectorXd y = Eigen::VectorXd::Zero(used_cols);
    for (std::ptrdiff_t i = 0; i < nrows; ++i)
        y(basis[static_cast<std::size_t>(i)]) = tab(i, ncols);
    LpSolution sol;
    sol.status = LpStatus::optimal;
    sol.x.resize(nvar);
    for (std::ptrdiff_t j = 0; j < nvar; ++j) {
        std::ptrdiff_t c = col_of[static_cast<std::size_t>(j)];
        sol.x(j) = split[static_cast<std::size_t>(j)] ? y(c) - y(c + 1) : y(c);
    }
    sol.objective = p.objective.dot(sol.x);
    return sol;
}

}  // namespace numkit
