#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "util.hpp"

namespace numkit {

// One step of a scalar increment path: a continuous-martingale increment with
// its quadratic variation, a drift increment, and realized jumps (each > -1
// for paths fed into exponentials).
struct StepIncrement {
    double cont_gauss = 0.0;
    double cont_qv = 0.0;
    double drift = 0.0;
    std::vector<double> jumps;
};

using IncrementPath = std::vector<StepIncrement>;

// Per-step multiplicative factor exp(gauss + drift - qv/2) * prod(1 + jump).
// Returns the value path starting at 1 (length steps + 1).
inline std::vector<double> stoch_exp(const IncrementPath& path) {
    std::vector<double> values;
    values.reserve(path.size() + 1);
    values.push_back(1.0);
    for (std::size_t m = 0; m < path.size(); ++m) {
        const auto& s = path[m];
        if (s.cont_qv < 0.0) throw std::invalid_argument("negative quadratic variation");
        double factor = std::exp(s.cont_gauss + s.drift - 0.5 * s.cont_qv);
        for (double j : s.jumps) {
            if (j <= -1.0)
                throw std::invalid_argument("jump <= -1 at step " + std::to_string(m));
            factor *= 1.0 + j;
        }
        values.push_back(values.back() * factor);
    }
    return values;
}

// Discrete stochastic logarithm: one jump W_m / W_{m-1} - 1 per step, so that
// stoch_exp(stoch_log(W)) == W exactly.
inline IncrementPath stoch_log(const std::vector<double>& wealth) {
    if (wealth.empty() || wealth.front() != 1.0)
        throw std::invalid_argument("wealth path must start at 1");
    IncrementPath path;
    path.reserve(wealth.size() - 1);
    for (std::size_t m = 1; m < wealth.size(); ++m) {
        if (wealth[m] <= 0.0)
            throw std::invalid_argument("nonpositive wealth at step " + std::to_string(m));
        StepIncrement s;
        s.jumps.push_back(wealth[m] / wealth[m - 1] - 1.0);
        path.push_back(std::move(s));
    }
    return path;
}

// Increment path of the reciprocal wealth: continuous parts negated with the
// quadratic variation folded into the drift, jumps -j/(1+j). The product of
// the two exponentials is 1, exactly on pure-jump paths.
inline IncrementPath reciprocal_log(const IncrementPath& path) {
    IncrementPath out;
    out.reserve(path.size());
    for (const auto& s : path) {
        StepIncrement r;
        r.cont_gauss = -s.cont_gauss;
        r.cont_qv = s.cont_qv;
        r.drift = -s.drift + s.cont_qv;
        for (double j : s.jumps) {
            if (j <= -1.0) throw std::invalid_argument("jump <= -1");
            r.jumps.push_back(-j / (1.0 + j));
        }
        out.push_back(std::move(r));
    }
    return out;
}

// Realized market step for the ratio identity: the diffusion increment vector
// u, the local characteristics scaled by delta_a, and the realized jumps.
struct RealizedStep {
    Eigen::VectorXd gauss;        // diffusion increment of S (already scaled)
    Eigen::MatrixXd c_da;         // c * delta_a
    Eigen::VectorXd drift_da;     // continuous drift of S * delta_a
    std::vector<Eigen::VectorXd> jump_sizes;
};

inline IncrementPath strategy_increments(const std::vector<RealizedStep>& steps,
                                         const std::vector<Eigen::VectorXd>& f) {
    if (steps.size() != f.size()) throw std::invalid_argument("strategy/path length mismatch");
    IncrementPath path;
    path.reserve(steps.size());
    for (std::size_t m = 0; m < steps.size(); ++m) {
        StepIncrement s;
        s.cont_gauss = f[m].dot(steps[m].gauss);
        s.cont_qv = f[m].dot(steps[m].c_da * f[m]);
        s.drift = f[m].dot(steps[m].drift_da);
        for (const auto& x : steps[m].jump_sizes) s.jumps.push_back(f[m].dot(x));
        path.push_back(std::move(s));
    }
    return path;
}

struct RatioCheck {
    double max_rel_error = 0.0;        // ratio identity E(f.S)/E(g.S) vs E((f-g).S^g)
    double max_reciprocal_error = 0.0; // E(-g.S^g) vs 1/E(g.S)
};

// Pathwise verification of the wealth-ratio identity and of the reciprocal
// identity on a realized discrete path.
inline RatioCheck ratio_transform_check(const std::vector<RealizedStep>& steps,
                                        const std::vector<Eigen::VectorXd>& f,
                                        const std::vector<Eigen::VectorXd>& g) {
    auto wealth_f = stoch_exp(strategy_increments(steps, f));
    auto wealth_g = stoch_exp(strategy_increments(steps, g));

    // Same realized path discounted by the wealth of g.
    std::vector<RealizedStep> shifted;
    shifted.reserve(steps.size());
    for (std::size_t m = 0; m < steps.size(); ++m) {
        RealizedStep t;
        t.gauss = steps[m].gauss;
        t.c_da = steps[m].c_da;
        t.drift_da = steps[m].drift_da - steps[m].c_da * g[m];
        for (const auto& x : steps[m].jump_sizes)
            t.jump_sizes.push_back(x / (1.0 + g[m].dot(x)));
        shifted.push_back(std::move(t));
    }
    std::vector<Eigen::VectorXd> diff(f.size());
    for (std::size_t m = 0; m < f.size(); ++m) diff[m] = f[m] - g[m];
    auto wealth_ratio = stoch_exp(strategy_increments(shifted, diff));

    std::vector<Eigen::VectorXd> neg_g(g.size());
    for (std::size_t m = 0; m < g.size(); ++m) neg_g[m] = -g[m];
    auto wealth_recip = stoch_exp(strategy_increments(shifted, neg_g));

    RatioCheck out;
    for (std::size_t m = 0; m < wealth_f.size(); ++m) {
        double lhs = wealth_f[m] / wealth_g[m];
        out.max_rel_error =
            std::max(out.max_rel_error, std::abs(lhs - wealth_ratio[m]) / std::abs(lhs));
        double rec = 1.0 / wealth_g[m];
        out.max_reciprocal_error =
            std::max(out.max_reciprocal_error, std::abs(wealth_recip[m] - rec) / rec);
    }
    return out;
}

// Tail diagnostics for a family of path samples indexed by a scale parameter.
struct BoundednessFamily {
    std::string label;
    std::vector<IncrementPath> paths;
};

struct BoundednessRow {
    std::string label;
    double sup_r_q99 = 0.0, sup_r_q999 = 0.0;       // running sup of R
    double terminal_r_q99 = 0.0, terminal_r_q999 = 0.0;
    double terminal_e_q99 = 0.0, terminal_e_q999 = 0.0;
    double sup_e_q99 = 0.0, sup_e_q999 = 0.0;
    double sup_absz_q99 = 0.0, sup_absz_q999 = 0.0;  // running sup |Z|, Z = L(1/E(R))
    double gamma1_q99 = 0.0;  // (1/2)<Rc> + sum(log(1+j) - j/(1+j))
    double gamma2_q99 = 0.0;  // <Rc> + sum j^2/(1+j)
};

struct BoundednessReport {
    std::vector<BoundednessRow> rows;
    bool co_movement_consistent = true;
};

inline BoundednessReport boundedness_stats(const std::vector<BoundednessFamily>& families) {
    if (families.empty()) throw std::invalid_argument("empty family");
    BoundednessReport report;
    for (const auto& fam : families) {
        if (fam.paths.empty()) throw std::invalid_argument("empty sample in family " + fam.label);
        std::vector<double> sup_r, term_r, term_e, sup_e, sup_absz, g1, g2;
        for (const auto& path : fam.paths) {
            double r = 0.0, sr = 0.0, z = 0.0, saz = 0.0, qv = 0.0;
            double gamma1 = 0.0, gamma2 = 0.0;
            auto values = stoch_exp(path);
            auto zpath = reciprocal_log(path);
            double se_sup = 1.0;
            for (std::size_t m = 0; m < path.size(); ++m) {
                const auto& s = path[m];
                double dr = s.cont_gauss + s.drift;
                for (double j : s.jumps) dr += j;
                r += dr;
                sr = std::max(sr, r);
                qv += s.cont_qv;
                double dz = zpath[m].cont_gauss + zpath[m].drift;
                for (double j : zpath[m].jumps) dz += j;
                z += dz;
                saz = std::max(saz, std::abs(z));
                for (double j : s.jumps) {
                    gamma1 += std::log1p(j) - j / (1.0 + j);
                    gamma2 += j * j / (1.0 + j);
                }
                se_sup = std::max(se_sup, values[m + 1]);
            }
            sup_r.push_back(sr);
            term_r.push_back(r);
            term_e.push_back(values.back());
            sup_e.push_back(se_sup);
            sup_absz.push_back(saz);
            g1.push_back(0.5 * qv + gamma1);
            g2.push_back(qv + gamma2);
        }
        BoundednessRow row;
        row.label = fam.label;
        row.sup_r_q99 = quantile(sup_r, 0.99);
        row.sup_r_q999 = quantile(sup_r, 0.999);
        row.terminal_r_q99 = quantile(term_r, 0.99);
        row.terminal_r_q999 = quantile(term_r, 0.999);
        row.terminal_e_q99 = quantile(term_e, 0.99);
        row.terminal_e_q999 = quantile(term_e, 0.999);
        row.sup_e_q99 = quantile(sup_e, 0.99);
        row.sup_e_q999 = quantile(sup_e, 0.999);
        row.sup_absz_q99 = quantile(sup_absz, 0.99);
        row.sup_absz_q999 = quantile(sup_absz, 0.999);
        row.gamma1_q99 = quantile(g1, 0.99);
        row.gamma2_q99 = quantile(g2, 0.99);
        report.rows.push_back(row);
    }
    // Co-movement across the family: the tail of terminal E(R) explodes iff
    // the tails of sup R, sup E(R) and the Gamma quantities do too.
    if (report.rows.size() >= 2) {
        auto exploding = [&](auto field) {
            double first = report.rows.front().*field;
            double last = report.rows.back().*field;
            return last > 4.0 * std::max(1e-12, first);
        };
        bool e_ex = exploding(&BoundednessRow::terminal_e_q999);
        bool r_ex = exploding(&BoundednessRow::sup_r_q999);
        bool se_ex = exploding(&BoundednessRow::sup_e_q999);
        bool g1_ex = exploding(&BoundednessRow::gamma1_q99);
        bool g2_ex = exploding(&BoundednessRow::gamma2_q99);
        report.co_movement_consistent = (e_ex == r_ex) && (e_ex == se_ex) && (g1_ex == g2_ex);
    }
    return report;
}

}  // namespace numkit
