#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "arbdetect.hpp"
#include "model.hpp"

namespace numkit {

class DomainError : public std::runtime_error {
  public:
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when the objective keeps increasing along an escape direction,
// which signals an immediate-arbitrage direction instead of an optimum.
class DivergenceError : public std::runtime_error {
  public:
    DivergenceError(const std::string& what, Eigen::VectorXd dir)
        : std::runtime_error(what), direction(std::move(dir)) {}
    Eigen::VectorXd direction;
};

struct SolveOptions {
    double grad_tol = 1e-11;
    double boundary_floor = 1e-12;
    double fraction_to_boundary = 0.99;
    double divergence_norm = 1e6;
    int max_iterations = 200;
};

struct SolveDiagnostics {
    double psi_star = 0.0;
    double grad_norm = 0.0;
    double foc_residual = 0.0;
    int iterations = 0;
    Eigen::Index restricted_dim = 0;
};

namespace detail {

inline void check_domain(const LocalTriplet& tr, const Eigen::VectorXd& v) {
    for (std::size_t i = 0; i < tr.jumps.atoms.size(); ++i) {
        if (1.0 + v.dot(tr.jumps.atoms[i].x) <= 0.0)
            throw DomainError("vector leaves the admissible domain: 1 + v.x <= 0 at atom " +
                              std::to_string(i));
    }
}

}  // namespace detail

// Growth objective: Psi(v) = b.v - (1/2) v'cv - sum_i k_i (v.x_i - log(1 + v.x_i)).
inline double psi_value(const LocalTriplet& tr, const Eigen::VectorXd& v) {
    detail::check_domain(tr, v);
    double val = tr.b.dot(v) - 0.5 * v.dot(tr.c * v);
    for (const auto& a : tr.jumps.atoms) {
        double y = v.dot(a.x);
        val -= a.k * (y - std::log1p(y));
    }
    return val;
}

inline Eigen::VectorXd psi_gradient(const LocalTriplet& tr, const Eigen::VectorXd& v) {
    detail::check_domain(tr, v);
    Eigen::VectorXd g = tr.b - tr.c * v;
    for (const auto& a : tr.jumps.atoms) {
        double y = v.dot(a.x);
        g -= a.k * (y / (1.0 + y)) * a.x;
    }
    return g;
}

inline Eigen::MatrixXd psi_hessian(const LocalTriplet& tr, const Eigen::VectorXd& v) {
    detail::check_domain(tr, v);
    Eigen::MatrixXd h = -tr.c;
    for (const auto& a : tr.jumps.atoms) {
        double w = 1.0 + v.dot(a.x);
        h -= (a.k / (w * w)) * (a.x * a.x.transpose());
    }
    return h;
}

// Drift functional of the wealth ratio:
// F(v, v0) = (v - v0).(b - c v0) - sum_i k_i (v - v0).x_i (v0.x_i)/(1 + v0.x_i).
// F <= 0 for all v certifies the optimum; with interior atoms F = 0.
inline double F_value(const LocalTriplet& tr, const Eigen::VectorXd& v, const Eigen::VectorXd& v0) {
    detail::check_domain(tr, v);
    detail::check_domain(tr, v0);
    Eigen::VectorXd diff = v - v0;
    double val = diff.dot(tr.b - tr.c * v0);
    for (const auto& a : tr.jumps.atoms) {
        double y0 = v0.dot(a.x);
        val -= a.k * diff.dot(a.x) * y0 / (1.0 + y0);
    }
    return val;
}

// Damped Newton on N-perp with a fraction-to-boundary line search; falls back
// to gradient ascent when the restricted Hessian is near singular.
inline std::pair<Eigen::VectorXd, SolveDiagnostics> solve_growth_optimal(
    const LocalTriplet& tr, const SolveOptions& opts = {}) {
    const Eigen::MatrixXd basis = null_complement(tr);
    const Eigen::Index r = basis.cols();
    SolveDiagnostics diag;
    diag.restricted_dim = r;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(tr.dimension());
    if (r == 0) {
        diag.psi_star = 0.0;
        return {v, diag};
    }

    const auto& atoms = tr.jumps.atoms;
    auto max_step = [&](const Eigen::VectorXd& from, const Eigen::VectorXd& dir) {
        double alpha = std::numeric_limits<double>::infinity();
        for (const auto& a : atoms) {
            double slope = dir.dot(a.x);
            if (slope < 0.0) {
                double room = 1.0 + from.dot(a.x) - opts.boundary_floor;
                alpha = std::min(alpha, opts.fraction_to_boundary * room / (-slope));
            }
        }
        return alpha;
    };

    double psi = 0.0;
    for (int it = 0; it < opts.max_iterations; ++it) {
        diag.iterations = it + 1;
        Eigen::VectorXd grad = psi_gradient(tr, v);
        Eigen::VectorXd grad_r = basis.transpose() * grad;
        diag.grad_norm = grad_r.norm();
        if (diag.grad_norm <= opts.grad_tol) break;

        Eigen::MatrixXd hess_r = basis.transpose() * psi_hessian(tr, v) * basis;
        Eigen::VectorXd dir_r;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(-hess_r);
        bool newton_ok = ldlt.info() == Eigen::Success && ldlt.isPositive();
        if (newton_ok) {
            dir_r = ldlt.solve(grad_r);
            newton_ok = dir_r.allFinite() && dir_r.dot(grad_r) > 0.0;
        }
        if (!newton_ok) dir_r = grad_r;
        Eigen::VectorXd dir = basis * dir_r;

        double alpha = std::min(1.0, max_step(v, dir));
        double slope = grad_r.dot(dir_r);
        // Near the optimum the predicted improvement drops below the
        // round-off noise of psi; line-search acceptance is meaningless
        // there, but the Newton step itself is still accurate.
        if (newton_ok && slope <= 1e-13 * (1.0 + std::abs(psi))) {
            v += alpha * dir;
            psi = psi_value(tr, v);
            continue;
        }
        double new_psi = -std::numeric_limits<double>::infinity();
        Eigen::VectorXd trial;
        int backtracks = 0;
        while (backtracks < 60) {
            trial = v + alpha * dir;
            new_psi = psi_value(tr, trial);
            if (new_psi >= psi + 1e-4 * alpha * slope) break;
            alpha *= 0.5;
            ++backtracks;
        }
        if (backtracks >= 60) break;  // stalled at machine precision
        v = trial;
        psi = new_psi;

        if (v.norm() > opts.divergence_norm && new_psi > 0.0) {
            throw DivergenceError("objective increases without bound along an escape direction",
                                  v.normalized());
        }
    }
    diag.psi_star = psi_value(tr, v);
    Eigen::VectorXd grad_r = basis.transpose() * psi_gradient(tr, v);
    diag.grad_norm = grad_r.norm();
    return {v, diag};
}

struct ModelSolution {
    Portfolio portfolio;
    std::vector<SolveDiagnostics> diagnostics;
};

inline ModelSolution solve_model(const MarketModel& model, const SolveOptions& opts = {}) {
    ModelSolution out;
    out.portfolio.weights.reserve(model.n_steps());
    out.diagnostics.reserve(model.n_steps());
    std::string failures;
    for (std::size_t m = 0; m < model.n_steps(); ++m) {
        try {
            auto [v, diag] = solve_growth_optimal(model.triplets[m], opts);
            out.portfolio.weights.push_back(std::move(v));
            out.diagnostics.push_back(diag);
        } catch (const DivergenceError& e) {
            failures += "step " + std::to_string(m) + ": " + e.what() + "; ";
        }
    }
    if (!failures.empty()) throw std::runtime_error("growth-optimal solve failed: " + failures);
    return out;
}

// Characteristics of prices discounted by the wealth of g:
// drift b - cg - sum k_i (g.x_i) x_i / (1 + g.x_i), unchanged diffusion, atoms
// pushed forward under x -> x / (1 + g.x).
inline LocalTriplet numeraire_transform(const LocalTriplet& tr, const Eigen::VectorXd& g) {
    detail::check_domain(tr, g);
    LocalTriplet out;
    out.c = tr.c;
    out.b = tr.b - tr.c * g;
    out.jumps.atoms.reserve(tr.jumps.atoms.size());
    for (const auto& a : tr.jumps.atoms) {
        double y = g.dot(a.x);
        out.b -= a.k * (y / (1.0 + y)) * a.x;
        out.jumps.atoms.push_back({a.x / (1.0 + y), a.k});
    }
    return out;
}

struct IntegrabilityProfile {
    std::vector<double> diffusion_term;
    std::vector<double> jump_term;
    std::vector<double> drift_term;
    double total = 0.0;
};

// Finite-grid profile of the integrability criterion for g.
inline IntegrabilityProfile integrability_profile(const MarketModel& model, const Portfolio& g) {
    g.validate(model);
    IntegrabilityProfile out;
    for (std::size_t m = 0; m < model.n_steps(); ++m) {
        const auto& tr = model.triplets[m];
        const auto& w = g.weights[m];
        double da = model.grid.steps[m].delta_a;
        double diff = w.dot(tr.c * w);
        double jump = 0.0;
        Eigen::VectorXd bh = truncation_convert(tr.b, tr.jumps, DriftDirection::to_truncated);
        double drift = w.dot(bh);
        for (const auto& a : tr.jumps.atoms) {
            double y = w.dot(a.x);
            jump += a.k * std::min(y * y, 1.0);
            if (a.x.norm() <= 1.0 && std::abs(y) > 1.0) drift -= a.k * y;
        }
        out.diffusion_term.push_back(da * diff);
        out.jump_term.push_back(da * jump);
        out.drift_term.push_back(da * std::abs(drift));
        out.total += da * (diff + jump + std::abs(drift));
    }
    return out;
}

}  // namespace numkit
