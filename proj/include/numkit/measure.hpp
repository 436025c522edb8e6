#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "growthopt.hpp"
#include "lp.hpp"
#include "mc.hpp"
#include "model.hpp"

namespace numkit {

enum class DensityStatus { feasible, infeasible_within_budget, structurally_infeasible, indeterminate };

inline std::string to_string(DensityStatus s) {
    switch (s) {
        case DensityStatus::feasible: return "feasible";
        case DensityStatus::infeasible_within_budget: return "infeasible_within_budget";
        case DensityStatus::structurally_infeasible: return "structurally_infeasible";
        default: return "indeterminate";
    }
}

// Per-step jump reweighting Y killing the drift:
//   minimize sum_i k_i |Y_i - 1|
//   s.t.     b + sum_i k_i (Y_i - 1) x_i = 0,  Y_i >= y_min,
//            and on predictable-jump steps sum_i k_i (Y_i - 1) = 0.
// Feasible when the optimal total-variation cost fits in epsilon/2.
struct DensitySolution {
    DensityStatus status = DensityStatus::indeterminate;
    std::vector<double> y;
    double tv_cost = 0.0;
    Eigen::VectorXd residual_drift;
};

struct DensityOptions {
    double y_min = 1e-6;      // strict positivity of the density
    double drift_tol = 1e-9;
};

inline DensitySolution sigma_density_step(const LocalTriplet& tr, StepKind kind, double epsilon,
                                          const DensityOptions& opts = {}) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
    const Eigen::Index d = tr.dimension();
    const Eigen::Index n = static_cast<Eigen::Index>(tr.jumps.atoms.size());
    DensitySolution out;
    out.residual_drift = tr.b;

    if (n == 0) {
        bool zero_drift = tr.b.norm() <= opts.drift_tol;
        out.status = zero_drift ? DensityStatus::feasible : DensityStatus::structurally_infeasible;
        return out;
    }

    // Split Y_i - 1 = p_i - q_i with p, q >= 0 for an exact L1 objective.
    const Eigen::Index n_eq = d + (kind == StepKind::predictable_jump ? 1 : 0);
    LpProblem lp;
    lp.objective.resize(2 * n);
    lp.nonneg.assign(static_cast<std::size_t>(2 * n), true);
    for (Eigen::Index i = 0; i < n; ++i) {
        double k = tr.jumps.atoms[static_cast<std::size_t>(i)].k;
        lp.objective(i) = -k;      // maximize negative cost
        lp.objective(n + i) = -k;
    }
    lp.a_eq.setZero(n_eq, 2 * n);
    lp.b_eq.setZero(n_eq);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& a = tr.jumps.atoms[static_cast<std::size_t>(i)];
        for (Eigen::Index r = 0; r < d; ++r) {
            lp.a_eq(r, i) = a.k * a.x(r);
            lp.a_eq(r, n + i) = -a.k * a.x(r);
        }
        if (kind == StepKind::predictable_jump) {
            lp.a_eq(d, i) = a.k;
            lp.a_eq(d, n + i) = -a.k;
        }
    }
    lp.b_eq.head(d) = -tr.b;
    // q_i <= 1 - y_min keeps Y_i >= y_min.
    lp.a_ub.setZero(n, 2 * n);
    lp.b_ub.setZero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        lp.a_ub(i, n + i) = 1.0;
        lp.b_ub(i) = 1.0 - opts.y_min;
    }

    LpSolution sol = solve_lp(lp);
    if (sol.status == LpStatus::infeasible) {
        out.status = DensityStatus::structurally_infeasible;
        return out;
    }
    if (sol.status != LpStatus::optimal) {
        out.status = DensityStatus::indeterminate;
        return out;
    }
    out.y.resize(static_cast<std::size_t>(n));
    out.tv_cost = 0.0;
    Eigen::VectorXd residual = tr.b;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& a = tr.jumps.atoms[static_cast<std::size_t>(i)];
        double dev = sol.x(i) - sol.x(n + i);
        out.y[static_cast<std::size_t>(i)] = 1.0 + dev;
        out.tv_cost += a.k * std::abs(dev);
        residual += a.k * dev * a.x;
    }
    out.residual_drift = residual;
    if (residual.norm() > opts.drift_tol) {
        out.status = DensityStatus::structurally_infeasible;
        return out;
    }
    out.status = out.tv_cost <= epsilon / 2.0 + 1e-12 ? DensityStatus::feasible
                                                      : DensityStatus::infeasible_within_budget;
    return out;
}

struct MeasureChangeResult {
    std::vector<DensitySolution> steps;
    std::vector<LocalTriplet> transformed;  // characteristics of S^g per step
    double max_step_cost = 0.0;
    DensityStatus status = DensityStatus::feasible;
};

// Numeraire-discounts the model by g and solves the per-step density LP on
// the transformed characteristics. With the growth-optimal g the transformed
// drift is already zero and Y = 1 everywhere.
inline MeasureChangeResult sigma_change(const MarketModel& model, const Portfolio& g,
                                        double epsilon, const DensityOptions& opts = {}) {
    g.validate(model);
    MeasureChangeResult out;
    for (std::size_t m = 0; m < model.n_steps(); ++m) {
        LocalTriplet tg = numeraire_transform(model.triplets[m], g.weights[m]);
        DensitySolution sol = sigma_density_step(tg, model.grid.steps[m].kind, epsilon, opts);
        out.max_step_cost = std::max(out.max_step_cost, sol.tv_cost);
        if (sol.status != DensityStatus::feasible && out.status == DensityStatus::feasible)
            out.status = sol.status;
        out.transformed.push_back(std::move(tg));
        out.steps.push_back(std::move(sol));
    }
    return out;
}

// Quadratic tilting weights 1 / (1 + (1/n) sum of squared realized jumps),
// normalized to unit sample mean.
inline std::vector<double> quadratic_tilt_weights(const PathBundle& bundle, std::uint64_t n) {
    if (bundle.n_paths == 0) throw std::invalid_argument("empty bundle");
    if (n < 1) throw std::invalid_argument("n must be >= 1");
    std::vector<double> w(bundle.n_paths);
    for (std::size_t p = 0; p < bundle.n_paths; ++p) {
        double sumsq = 0.0;
        for (std::size_t m = 0; m < bundle.model.n_steps(); ++m) {
            const auto& atoms = bundle.model.triplets[m].jumps.atoms;
            for (std::size_t i = 0; i < atoms.size(); ++i) {
                double cnt = bundle.jump_counts[m][p * atoms.size() + i];
                sumsq += cnt * atoms[i].x.squaredNorm();
            }
        }
        w[p] = 1.0 / (1.0 + sumsq / static_cast<double>(n));
    }
    double mean = pairwise_sum(w) / static_cast<double>(bundle.n_paths);
    for (double& v : w) v /= mean;
    return w;
}

// Simulates under the reweighted intensities k_i Y_i and checks that the
// transformed model passes the deflator test with the zero numeraire.
inline VerificationReport verify_sigma_change(const MarketModel& model, const Portfolio& g,
                                              const MeasureChangeResult& densities,
                                              std::size_t n_paths, std::uint64_t seed,
                                              double z_gate = 4.0) {
    if (densities.status != DensityStatus::feasible)
        throw std::invalid_argument("densities must be feasible for all steps");
    MarketModel reweighted;
    reweighted.dimension = model.dimension;
    reweighted.grid = model.grid;
    for (std::size_t m = 0; m < model.n_steps(); ++m) {
        LocalTriplet tr = densities.transformed[m];
        for (std::size_t i = 0; i < tr.jumps.atoms.size(); ++i)
            tr.jumps.atoms[i].k *= densities.steps[m].y[i];
        // Reweighting kills the compensated drift; the triplet drift becomes 0.
        tr.b = Eigen::VectorXd::Zero(model.dimension);
        reweighted.triplets.push_back(std::move(tr));
    }
    reweighted.validate();

    Portfolio zero;
    std::vector<Portfolio> probes;
    for (double scale : {0.0, 0.5, 1.0}) {
        Portfolio f;
        for (std::size_t m = 0; m < model.n_steps(); ++m) {
            Eigen::VectorXd w = Eigen::VectorXd::Constant(model.dimension, scale * 0.25);
            // Stay inside the admissible domain of the transformed atoms.
            for (const auto& a : reweighted.triplets[m].jumps.atoms) {
                double y = w.dot(a.x);
                if (y <= -0.9) w *= 0.5 / std::abs(y);
            }
            f.weights.push_back(w);
        }
        probes.push_back(std::move(f));
    }
    for (std::size_t m = 0; m < model.n_steps(); ++m)
        zero.weights.push_back(Eigen::VectorXd::Zero(model.dimension));
    return deflator_test(reweighted, zero, probes, n_paths, seed, z_gate);
}

}  // namespace numkit
