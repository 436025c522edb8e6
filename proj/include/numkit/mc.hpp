#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "growthopt.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "stochexp.hpp"
#include "util.hpp"

namespace numkit {

// Simulated paths of the model. Per step we keep the diffusion increment
// vector and the realized jump count per atom; everything else is recomputed
// from the triplet when a strategy is evaluated.
struct PathBundle {
    std::uint64_t seed = 0;
    std::size_t n_paths = 0;
    MarketModel model;
    std::vector<Eigen::MatrixXd> chol;            // per step: L with L L' = c
    std::vector<Eigen::VectorXd> cont_drift;      // per step: b - sum k_i x_i
    std::vector<std::vector<double>> gauss;       // per step: n_paths * d
    std::vector<std::vector<std::uint32_t>> jump_counts;  // per step: n_paths * n_atoms

    Eigen::Map<const Eigen::VectorXd> gauss_at(std::size_t step, std::size_t path) const {
        return {gauss[step].data() + path * static_cast<std::size_t>(model.dimension),
                model.dimension};
    }
};

namespace detail {

inline Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& c) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal();
}

}  // namespace detail

// Discretized dynamics. Continuous step:
//   dS = (b - sum k_i x_i) dA + L xi sqrt(dA) + raw Poisson jumps,
// so the increment mean is exactly b dA (untruncated drift bookkeeping).
// Predictable-jump step: at most one jump, atom i with probability k_i dA,
// plus drift (b - sum k_i x_i) dA.
inline PathBundle simulate(const MarketModel& model, std::size_t n_paths, std::uint64_t seed,
                           std::size_t memory_budget_bytes = std::size_t(2) << 30) {
    if (n_paths < 1) throw std::invalid_argument("n_paths must be >= 1");
    const std::size_t d = static_cast<std::size_t>(model.dimension);
    std::size_t per_path = 0;
    for (const auto& tr : model.triplets) per_path += 8 * (d + tr.jumps.atoms.size());
    if (per_path * n_paths > memory_budget_bytes)
        throw std::invalid_argument("path storage exceeds the memory budget");

    PathBundle bundle;
    bundle.seed = seed;
    bundle.n_paths = n_paths;
    bundle.model = model;
    const std::size_t n_steps = model.n_steps();
    bundle.chol.resize(n_steps);
    bundle.cont_drift.resize(n_steps);
    bundle.gauss.resize(n_steps);
    bundle.jump_counts.resize(n_steps);
    for (std::size_t m = 0; m < n_steps; ++m) {
        const auto& tr = model.triplets[m];
        bundle.chol[m] = detail::psd_factor(tr.c);
        Eigen::VectorXd drift = tr.b;
        for (const auto& a : tr.jumps.atoms) drift -= a.k * a.x;
        bundle.cont_drift[m] = drift;
        bundle.gauss[m].assign(n_paths * d, 0.0);
        bundle.jump_counts[m].assign(n_paths * tr.jumps.atoms.size(), 0);
    }

    parallel_for(n_paths, [&](std::size_t lo, std::size_t hi) {
        Eigen::VectorXd xi(model.dimension);
        for (std::size_t p = lo; p < hi; ++p) {
            for (std::size_t m = 0; m < n_steps; ++m) {
                const auto& tr = bundle.model.triplets[m];
                const auto& st = bundle.model.grid.steps[m];
                CounterRng rng(seed, p, m);
                for (Eigen::Index i = 0; i < model.dimension; ++i) xi(i) = rng.next_normal();
                Eigen::VectorXd u = bundle.chol[m] * xi * std::sqrt(st.delta_a);
                for (std::size_t i = 0; i < d; ++i) bundle.gauss[m][p * d + i] = u(static_cast<Eigen::Index>(i));
                const std::size_t na = tr.jumps.atoms.size();
                if (na == 0) continue;
                if (st.kind == StepKind::continuous) {
                    for (std::size_t i = 0; i < na; ++i) {
                        bundle.jump_counts[m][p * na + i] = static_cast<std::uint32_t>(
                            rng.next_poisson(tr.jumps.atoms[i].k * st.delta_a));
                    }
                } else {
                    double u01 = rng.pick();
                    double cum = 0.0;
                    for (std::size_t i = 0; i < na; ++i) {
                        cum += tr.jumps.atoms[i].k * st.delta_a;
                        if (u01 < cum) {
                            bundle.jump_counts[m][p * na + i] = 1;
                            break;
                        }
                    }
                }
            }
        }
    });
    return bundle;
}

// Realized increment of S at one step of one path.
inline Eigen::VectorXd realized_increment(const PathBundle& bundle, std::size_t step,
                                          std::size_t path) {
    const auto& tr = bundle.model.triplets[step];
    const auto& st = bundle.model.grid.steps[step];
    Eigen::VectorXd ds = bundle.cont_drift[step] * st.delta_a + bundle.gauss_at(step, path);
    const std::size_t na = tr.jumps.atoms.size();
    for (std::size_t i = 0; i < na; ++i) {
        std::uint32_t n = bundle.jump_counts[step][path * na + i];
        if (n > 0) ds += static_cast<double>(n) * tr.jumps.atoms[i].x;
    }
    return ds;
}

// Realized path in the per-step form consumed by the path-algebra module.
inline std::vector<RealizedStep> realized_steps(const PathBundle& bundle, std::size_t path) {
    std::vector<RealizedStep> out;
    out.reserve(bundle.model.n_steps());
    for (std::size_t m = 0; m < bundle.model.n_steps(); ++m) {
        const auto& tr = bundle.model.triplets[m];
        const auto& st = bundle.model.grid.steps[m];
        RealizedStep r;
        r.gauss = bundle.gauss_at(m, path);
        r.c_da = tr.c * st.delta_a;
        r.drift_da = bundle.cont_drift[m] * st.delta_a;
        const std::size_t na = tr.jumps.atoms.size();
        if (st.kind == StepKind::continuous) {
            for (std::size_t i = 0; i < na; ++i) {
                for (std::uint32_t n = 0; n < bundle.jump_counts[m][path * na + i]; ++n)
                    r.jump_sizes.push_back(tr.jumps.atoms[i].x);
            }
        } else {
            // The whole predictable step realizes as a single jump of S.
            r.jump_sizes.push_back(realized_increment(bundle, m, path));
            r.gauss.setZero();
            r.drift_da.setZero();
            r.c_da.setZero(bundle.model.dimension, bundle.model.dimension);
        }
        out.push_back(std::move(r));
    }
    return out;
}

// Terminal wealth of E(f . S) on one path of the bundle.
inline double terminal_wealth(const PathBundle& bundle, const Portfolio& f, std::size_t path) {
    double w = 1.0;
    for (std::size_t m = 0; m < bundle.model.n_steps(); ++m) {
        const auto& tr = bundle.model.triplets[m];
        const auto& st = bundle.model.grid.steps[m];
        const auto& fv = f.weights[m];
        if (st.kind == StepKind::continuous) {
            double expo = fv.dot(bundle.gauss_at(m, path)) +
                          fv.dot(bundle.cont_drift[m]) * st.delta_a -
                          0.5 * fv.dot(tr.c * fv) * st.delta_a;
            double factor = std::exp(expo);
            const std::size_t na = tr.jumps.atoms.size();
            for (std::size_t i = 0; i < na; ++i) {
                std::uint32_t n = bundle.jump_counts[m][path * na + i];
                if (n == 0) continue;
                double j = fv.dot(tr.jumps.atoms[i].x);
                if (j <= -1.0)
                    throw std::runtime_error("inadmissible strategy at path " + std::to_string(path) +
                                             " step " + std::to_string(m));
                factor *= std::pow(1.0 + j, static_cast<double>(n));
            }
            w *= factor;
        } else {
            double j = fv.dot(realized_increment(bundle, m, path));
            if (j <= -1.0)
                throw std::runtime_error("inadmissible strategy at path " + std::to_string(path) +
                                         " step " + std::to_string(m));
            w *= 1.0 + j;
        }
    }
    return w;
}

enum class Verdict { martingale_consistent, supermartingale_consistent, violation };

inline std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::martingale_consistent: return "martingale-consistent";
        case Verdict::supermartingale_consistent: return "supermartingale-consistent";
        default: return "violation";
    }
}

struct VerificationRow {
    std::string label;
    double mean = 0.0;
    double se = 0.0;
    double z = 0.0;
    Verdict verdict = Verdict::violation;
};

struct VerificationReport {
    std::vector<VerificationRow> rows;
    bool any_violation() const {
        for (const auto& r : rows)
            if (r.verdict == Verdict::violation) return true;
        return false;
    }
};

// Decision rule on the sample mean of terminal ratios E(f.S)_T / E(g.S)_T:
// within 4 SE of 1 -> martingale-consistent; below 1 + 4 SE ->
// supermartingale-consistent; otherwise violation.
inline VerificationRow classify_ratio_sample(std::span<const double> ratios,
                                             const std::string& label, double z_gate = 4.0) {
    SampleStats st = sample_stats(ratios);
    VerificationRow row;
    row.label = label;
    row.mean = st.mean;
    row.se = st.se;
    row.z = st.se > 0.0 ? (st.mean - 1.0) / st.se : (st.mean == 1.0 ? 0.0 : std::copysign(1e30, st.mean - 1.0));
    if (std::abs(row.z) <= z_gate)
        row.verdict = Verdict::martingale_consistent;
    else if (row.z < 0.0)
        row.verdict = Verdict::supermartingale_consistent;
    else
        row.verdict = Verdict::violation;
    return row;
}

inline VerificationReport deflator_test(const MarketModel& model, const Portfolio& g,
                                        const std::vector<Portfolio>& f_list, std::size_t n_paths,
                                        std::uint64_t seed, double z_gate = 4.0) {
    g.validate(model);
    for (const auto& f : f_list) f.validate(model);
    PathBundle bundle = simulate(model, n_paths, seed);
    VerificationReport report;
    std::vector<double> ratios(n_paths);
    for (std::size_t fi = 0; fi < f_list.size(); ++fi) {
        parallel_for(n_paths, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t p = lo; p < hi; ++p)
                ratios[p] =
                    terminal_wealth(bundle, f_list[fi], p) / terminal_wealth(bundle, g, p);
        });
        report.rows.push_back(classify_ratio_sample(ratios, "f[" + std::to_string(fi) + "]", z_gate));
    }
    return report;
}

struct NupbrResult {
    std::vector<double> leverage;   // scale applied to the base strategy
    std::vector<double> quantile999;
    bool unbounded_suspect = false;
};

// Scales the base strategy by 1, 2, 4, ... and watches the 99.9% terminal
// wealth quantile. Sustained growth across every doubling marks the model
// unbounded-suspect.
inline NupbrResult nupbr_probe(const MarketModel& model, const Portfolio& base,
                               std::size_t n_levels, std::size_t n_paths, std::uint64_t seed) {
    PathBundle bundle = simulate(model, n_paths, seed);
    NupbrResult out;
    std::vector<double> wealth(n_paths);
    for (std::size_t lvl = 0; lvl < n_levels; ++lvl) {
        double scale = std::pow(2.0, static_cast<double>(lvl));
        Portfolio f = base;
        for (auto& w : f.weights) w *= scale;
        bool admissible = true;
        for (std::size_t m = 0; m < model.n_steps() && admissible; ++m) {
            for (const auto& a : model.triplets[m].jumps.atoms)
                if (1.0 + f.weights[m].dot(a.x) <= 0.0) admissible = false;
        }
        if (!admissible) break;
        parallel_for(n_paths, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t p = lo; p < hi; ++p) wealth[p] = terminal_wealth(bundle, f, p);
        });
        out.leverage.push_back(scale);
        out.quantile999.push_back(quantile(wealth, 0.999));
    }
    if (out.quantile999.size() >= 3) {
        bool growing = true;
        for (std::size_t j = 1; j < out.quantile999.size(); ++j)
            if (out.quantile999[j] < 1.2 * out.quantile999[j - 1]) growing = false;
        double total = out.quantile999.back() / std::max(1e-300, out.quantile999.front());
        out.unbounded_suspect = growing && total > 10.0;
    }
    return out;
}

// Designed integrand for the truncated-integrand law of large numbers:
// deterministic weights h against martingale increments with variance rate q.
struct LlnTruncationSpec {
    std::vector<double> h;        // per-step weight, possibly huge
    std::vector<double> q;        // per-step variance rate of the martingale
    std::vector<double> delta_a;  // per-step clock increment
};

struct LlnLevel {
    double level = 0.0;            // truncation n
    double tail_p_10 = 0.0;        // empirical P(|ratio| > 0.1)  (or |ratio-1| for counting)
    double tail_p_05 = 0.0;        // empirical P(|ratio| > 0.05)
    double normalizer = 0.0;       // L^n_T (resp. R^n_T)
};

struct LlnReport {
    std::vector<LlnLevel> levels;
    bool vacuous = false;
};

inline LlnReport lln_truncation_test(const LlnTruncationSpec& spec, std::size_t n_levels,
                                     std::size_t n_paths, std::uint64_t seed) {
    const std::size_t n_steps = spec.h.size();
    if (spec.q.size() != n_steps || spec.delta_a.size() != n_steps)
        throw std::invalid_argument("lln spec arrays must have equal length");
    LlnReport report;
    std::vector<double> ratio(n_paths);
    for (std::size_t lvl = 0; lvl < n_levels; ++lvl) {
        double n = std::pow(2.0, static_cast<double>(lvl));
        double l_t = 1.0;
        for (std::size_t m = 0; m < n_steps; ++m) {
            double hn = std::abs(spec.h[m]) <= n ? spec.h[m] : 0.0;
            l_t += spec.q[m] * hn * hn * spec.delta_a[m];
        }
        parallel_for(n_paths, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t p = lo; p < hi; ++p) {
                CounterRng rng(seed, p, lvl);
                double m_t = 0.0;
                for (std::size_t m = 0; m < n_steps; ++m) {
                    double hn = std::abs(spec.h[m]) <= n ? spec.h[m] : 0.0;
                    if (hn == 0.0) {
                        rng.next_normal();  // keep the stream aligned across levels
                        continue;
                    }
                    m_t += hn * std::sqrt(spec.q[m] * spec.delta_a[m]) * rng.next_normal();
                }
                ratio[p] = m_t / l_t;
            }
        });
        LlnLevel level;
        level.level = n;
        level.normalizer = l_t;
        for (double r : ratio) {
            if (std::abs(r) > 0.1) level.tail_p_10 += 1.0;
            if (std::abs(r) > 0.05) level.tail_p_05 += 1.0;
        }
        level.tail_p_10 /= static_cast<double>(n_paths);
        level.tail_p_05 /= static_cast<double>(n_paths);
        report.levels.push_back(level);
    }
    return report;
}

// Counting-process version: compensator increments dN gated by G <= n.
struct LlnCountingSpec {
    std::vector<double> dn;  // per-step compensator increment, >= 0
    std::vector<double> g;   // per-step gate level, >= 0
};

inline LlnReport lln_counting_test(const LlnCountingSpec& spec, std::size_t n_levels,
                                   std::size_t n_paths, std::uint64_t seed) {
    const std::size_t n_steps = spec.dn.size();
    if (spec.g.size() != n_steps)
        throw std::invalid_argument("lln spec arrays must have equal length");
    LlnReport report;
    double total = 0.0;
    for (double v : spec.dn) total += v;
    report.vacuous = total == 0.0;
    std::vector<double> ratio(n_paths);
    for (std::size_t lvl = 0; lvl < n_levels; ++lvl) {
        double n = std::pow(2.0, static_cast<double>(lvl));
        double r_t = 1.0;
        for (std::size_t m = 0; m < n_steps; ++m)
            if (spec.g[m] <= n) r_t += spec.dn[m];
        parallel_for(n_paths, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t p = lo; p < hi; ++p) {
                CounterRng rng(seed, p, lvl);
                double n_t = 0.0;
                for (std::size_t m = 0; m < n_steps; ++m) {
                    if (spec.g[m] <= n)
                        n_t += static_cast<double>(rng.next_poisson(spec.dn[m]));
                }
                ratio[p] = report.vacuous ? 0.0 : n_t / r_t - 1.0;
            }
        });
        LlnLevel level;
        level.level = n;
        level.normalizer = r_t;
        for (double r : ratio) {
            if (std::abs(r) > 0.1) level.tail_p_10 += 1.0;
            if (std::abs(r) > 0.05) level.tail_p_05 += 1.0;
        }
        level.tail_p_10 /= static_cast<double>(n_paths);
        level.tail_p_05 /= static_cast<double>(n_paths);
        report.levels.push_back(level);
    }
    return report;
}

}  // namespace numkit
