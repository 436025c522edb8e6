// Command-line front end: validate -> detect -> solve -> simulate -> verify ->
// measure-change, plus the law-of-large-numbers suites. Reports are JSON with
// a schema_version field and enough config (model hash, seed, tolerances) to
// reproduce the run byte for byte.
#include <CLI11.hpp>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <numkit/arbdetect.hpp>
#include <numkit/growthopt.hpp>
#include <numkit/mc.hpp>
#include <numkit/measure.hpp>
#include <numkit/model.hpp>
#include <numkit/stochexp.hpp>
#include <numkit/util.hpp>

namespace {

using json = nlohmann::ordered_json;
using namespace numkit;

// Exit codes: 0 all verdicts consistent, 1 usage/validation error,
// 2 violation or arbitrage found, 3 numerical indeterminate.
constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kViolation = 2;
constexpr int kIndeterminate = 3;

struct RunConfig {
    std::string model_path;
    std::string out_path;
    std::uint64_t seed = 1;
    std::size_t paths = 100000;
    double epsilon = 0.5;
    double tol = 1e-9;
    bool plot = false;
};

struct LoadedModel {
    MarketModel model;
    std::string hash;
};

LoadedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelError("cannot open model file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    LoadedModel out;
    out.hash = hex64(fnv1a({text.data(), text.size()}));
    json doc;
    try {
        doc = json::parse(text);
    } catch (const std::exception& e) {
        throw ModelError(std::string("model file is not valid JSON: ") + e.what());
    }
    out.model = parse_model(doc);
    return out;
}

json report_header(const std::string& command, const RunConfig& cfg, const std::string& hash) {
    json r;
    r["schema_version"] = kSchemaVersion;
    r["command"] = command;
    r["model"] = cfg.model_path;
    r["model_hash"] = hash;
    r["seed"] = cfg.seed;
    r["paths"] = cfg.paths;
    r["epsilon"] = cfg.epsilon;
    r["tol"] = cfg.tol;
    return r;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write: " + path);
    out << text;
}

int emit(const json& report, const RunConfig& cfg, int code) {
    std::string text = report.dump(2) + "\n";
    if (!cfg.out_path.empty())
        write_text(cfg.out_path, text);
    else
        std::cout << text;
    return code;
}

std::vector<double> to_vec(const Eigen::VectorXd& v) {
    return {v.data(), v.data() + v.size()};
}

// Minimal deterministic SVG polyline chart of one or more series.
void write_svg_curves(const std::string& path, const std::string& title,
                      const std::vector<std::pair<std::string, std::vector<double>>>& series) {
    const double w = 640.0, h = 400.0, pad = 48.0;
    double lo = 0.0, hi = 1e-300;
    std::size_t n = 1;
    for (const auto& [name, ys] : series) {
        n = std::max(n, ys.size());
        for (double y : ys) {
            hi = std::max(hi, y);
            lo = std::min(lo, y);
        }
    }
    if (hi <= lo) hi = lo + 1.0;
    std::ostringstream svg;
    svg.precision(6);
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << pad << "\" y=\"24\" font-family=\"monospace\" font-size=\"14\">"
        << title << "</text>\n";
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    for (std::size_t s = 0; s < series.size(); ++s) {
        const auto& ys = series[s].second;
        svg << "<polyline fill=\"none\" stroke=\"" << colors[s % 4] << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < ys.size(); ++i) {
            double x = pad + (w - 2 * pad) * (ys.size() > 1 ? static_cast<double>(i) / (ys.size() - 1) : 0.5);
            double y = h - pad - (h - 2 * pad) * (ys[i] - lo) / (hi - lo);
            svg << x << "," << y << " ";
        }
        svg << "\"/>\n<text x=\"" << pad << "\" y=\"" << (44 + 16 * s)
            << "\" font-family=\"monospace\" font-size=\"12\" fill=\"" << colors[s % 4] << "\">"
            << series[s].first << "</text>\n";
    }
    svg << "</svg>\n";
    write_text(path, svg.str());
}

std::string plot_path(const RunConfig& cfg, const std::string& stem) {
    if (!cfg.out_path.empty()) return cfg.out_path + "." + stem + ".svg";
    return stem + ".svg";
}

json validate_section(const LoadedModel& lm) {
    json s;
    s["dimension"] = lm.model.dimension;
    s["steps"] = lm.model.n_steps();
    s["sigma_special"] = sigma_special_check(lm.model);
    s["ok"] = true;
    return s;
}

json detect_section(const LoadedModel& lm, const RunConfig& cfg, int& code) {
    ArbitrageReport rep = scan_model(lm.model, cfg.tol);
    json s;
    s["steps"] = json::array();
    for (const auto& step : rep.steps) {
        json js;
        switch (step.verdict) {
            case StepVerdict::clean: js["verdict"] = "clean"; break;
            case StepVerdict::immediate_arbitrage: js["verdict"] = "immediate_arbitrage"; break;
            default: js["verdict"] = "indeterminate"; break;
        }
        js["slack"] = step.slack;
        js["null_dimension"] = step.null_basis.cols();
        if (step.certificate) js["certificate"] = to_vec(*step.certificate);
        s["steps"].push_back(js);
    }
    s["clean"] = rep.clean();
    if (rep.indeterminate()) code = std::max(code, kIndeterminate);
    if (!rep.clean() && !rep.indeterminate()) code = std::max(code, kViolation);
    return s;
}

json solve_section(const LoadedModel& lm, ModelSolution& sol) {
    sol = solve_model(lm.model);
    json s;
    s["portfolio"] = serialize_portfolio(sol.portfolio);
    s["steps"] = json::array();
    for (std::size_t m = 0; m < sol.diagnostics.size(); ++m) {
        const auto& d = sol.diagnostics[m];
        json js;
        js["psi_star"] = d.psi_star;
        js["grad_norm"] = d.grad_norm;
        js["iterations"] = d.iterations;
        js["restricted_dim"] = d.restricted_dim;
        s["steps"].push_back(js);
    }
    return s;
}

json verify_section(const LoadedModel& lm, const ModelSolution& sol, const RunConfig& cfg,
                    int& code, std::vector<double>* z_out) {
    json s;
    // Strategies along the segment to the optimum stay admissible.
    std::vector<Portfolio> probes;
    json labels = json::array();
    for (double scale : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        Portfolio f;
        for (const auto& w : sol.portfolio.weights) f.weights.push_back(scale * w);
        probes.push_back(std::move(f));
        labels.push_back(scale);
    }
    VerificationReport rep = deflator_test(lm.model, sol.portfolio, probes, cfg.paths, cfg.seed);
    s["deflator"] = json::array();
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        const auto& row = rep.rows[i];
        json jr;
        jr["scale"] = labels[i];
        jr["mean"] = row.mean;
        jr["se"] = row.se;
        jr["z"] = row.z;
        jr["verdict"] = to_string(row.verdict);
        s["deflator"].push_back(jr);
        if (z_out) z_out->push_back(row.z);
        if (row.verdict == Verdict::violation) code = std::max(code, kViolation);
    }

    // Pathwise ratio identity on a deterministic sample of paths.
    PathBundle bundle = simulate(lm.model, std::min<std::size_t>(cfg.paths, 128), cfg.seed);
    double max_ratio_err = 0.0;
    std::vector<Eigen::VectorXd> f_half;
    for (const auto& w : sol.portfolio.weights) f_half.push_back(0.5 * w);
    std::vector<Eigen::VectorXd> g_full(sol.portfolio.weights.begin(), sol.portfolio.weights.end());
    for (std::size_t p = 0; p < bundle.n_paths; ++p) {
        auto chk = ratio_transform_check(realized_steps(bundle, p), f_half, g_full);
        max_ratio_err = std::max(max_ratio_err, chk.max_rel_error);
    }
    s["ratio_identity_max_rel_error"] = max_ratio_err;
    double ratio_gate = std::max(cfg.tol, 1e-10);
    if (max_ratio_err > ratio_gate) code = std::max(code, kViolation);

    IntegrabilityProfile prof = integrability_profile(lm.model, sol.portfolio);
    json jp;
    jp["diffusion"] = prof.diffusion_term;
    jp["jump"] = prof.jump_term;
    jp["drift"] = prof.drift_term;
    jp["total"] = prof.total;
    s["integrability"] = jp;
    return s;
}

json measure_section(const LoadedModel& lm, const ModelSolution& sol, const RunConfig& cfg,
                     int& code) {
    json s;
    MeasureChangeResult change = sigma_change(lm.model, sol.portfolio, cfg.epsilon,
                                              {1e-6, cfg.tol});
    s["status"] = to_string(change.status);
    s["max_step_cost"] = change.max_step_cost;
    s["steps"] = json::array();
    for (const auto& step : change.steps) {
        json js;
        js["status"] = to_string(step.status);
        js["tv_cost"] = step.tv_cost;
        js["y"] = step.y;
        js["residual_drift"] = to_vec(step.residual_drift);
        s["steps"].push_back(js);
    }
    if (change.status == DensityStatus::indeterminate) {
        code = std::max(code, kIndeterminate);
    } else if (change.status != DensityStatus::feasible) {
        code = std::max(code, kViolation);
    } else {
        VerificationReport rep =
            verify_sigma_change(lm.model, sol.portfolio, change, cfg.paths, cfg.seed);
        s["reweighted_deflator"] = json::array();
        for (const auto& row : rep.rows) {
            json jr;
            jr["label"] = row.label;
            jr["mean"] = row.mean;
            jr["se"] = row.se;
            jr["z"] = row.z;
            jr["verdict"] = to_string(row.verdict);
            s["reweighted_deflator"].push_back(jr);
            if (row.verdict == Verdict::violation) code = std::max(code, kViolation);
        }
    }
    return s;
}

json lln_levels_json(const LlnReport& rep) {
    json arr = json::array();
    for (const auto& lvl : rep.levels) {
        json jl;
        jl["level"] = lvl.level;
        jl["normalizer"] = lvl.normalizer;
        jl["tail_p_10"] = lvl.tail_p_10;
        jl["tail_p_05"] = lvl.tail_p_05;
        arr.push_back(jl);
    }
    return arr;
}

bool tails_nonincreasing(const LlnReport& rep, std::size_t n_paths) {
    double slack = 2.0 * std::sqrt(0.25 / static_cast<double>(n_paths));
    for (std::size_t j = 1; j < rep.levels.size(); ++j) {
        if (rep.levels[j].tail_p_10 > rep.levels[j - 1].tail_p_10 + slack) return false;
        if (rep.levels[j].tail_p_05 > rep.levels[j - 1].tail_p_05 + slack) return false;
    }
    return true;
}

json lln_section(const RunConfig& cfg, int& code, std::vector<double>* curve_out) {
    json s;
    std::size_t n_paths = std::min<std::size_t>(cfg.paths, 10000);
    const std::size_t n_levels = 7;  // n in {1, 2, 4, ..., 64}

    LlnTruncationSpec divergent;
    for (int m = 0; m < 12; ++m) {
        divergent.h.push_back(std::pow(2.0, m));
        divergent.q.push_back(2.0);
        divergent.delta_a.push_back(1.0);
    }
    LlnReport trunc = lln_truncation_test(divergent, n_levels, n_paths, cfg.seed);
    s["truncation_divergent"] = lln_levels_json(trunc);
    bool trunc_ok = tails_nonincreasing(trunc, n_paths);
    s["truncation_divergent_nonincreasing"] = trunc_ok;

    LlnTruncationSpec bounded;
    bounded.h = {0.5, 0.5, 0.5};
    bounded.q = {1.0, 1.0, 1.0};
    bounded.delta_a = {0.25, 0.25, 0.25};
    LlnReport stable = lln_truncation_test(bounded, n_levels, n_paths, cfg.seed + 1);
    s["truncation_bounded"] = lln_levels_json(stable);

    LlnCountingSpec counting;
    for (int m = 0; m < 8; ++m) {
        counting.dn.push_back(10.0 * std::pow(4.0, m));
        counting.g.push_back(std::pow(2.0, m));
    }
    LlnReport count = lln_counting_test(counting, n_levels, n_paths, cfg.seed + 2);
    s["counting_divergent"] = lln_levels_json(count);
    bool count_ok = tails_nonincreasing(count, n_paths);
    s["counting_divergent_nonincreasing"] = count_ok;

    LlnCountingSpec vacuous;
    vacuous.dn = {0.0, 0.0};
    vacuous.g = {1.0, 1.0};
    LlnReport empty = lln_counting_test(vacuous, 2, 16, cfg.seed + 3);
    s["counting_vacuous"] = empty.vacuous;

    if (!trunc_ok || !count_ok) code = std::max(code, kViolation);
    if (curve_out)
        for (const auto& lvl : trunc.levels) curve_out->push_back(lvl.tail_p_10);
    return s;
}

int run_simulate(const LoadedModel& lm, const RunConfig& cfg) {
    PathBundle bundle = simulate(lm.model, cfg.paths, cfg.seed);
    json report = report_header("simulate", cfg, lm.hash);
    report["steps"] = json::array();
    for (std::size_t m = 0; m < lm.model.n_steps(); ++m) {
        std::vector<double> inc(bundle.n_paths);
        for (std::size_t p = 0; p < bundle.n_paths; ++p)
            inc[p] = realized_increment(bundle, m, p)(0);
        SampleStats st = sample_stats(inc);
        json js;
        js["increment_mean_coord0"] = st.mean;
        js["increment_se_coord0"] = st.se;
        report["steps"].push_back(js);
    }

    if (!cfg.out_path.empty()) {
        // Binary dump, little-endian doubles throughout (layout in README):
        // [n_paths, n_steps, dimension], then per step [n_atoms],
        // gauss row-major n_paths x dimension, counts n_paths x n_atoms.
        std::ofstream out(cfg.out_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write: " + cfg.out_path);
        auto put = [&](double v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
        put(static_cast<double>(bundle.n_paths));
        put(static_cast<double>(lm.model.n_steps()));
        put(static_cast<double>(lm.model.dimension));
        for (std::size_t m = 0; m < lm.model.n_steps(); ++m) {
            const std::size_t na = lm.model.triplets[m].jumps.atoms.size();
            put(static_cast<double>(na));
            for (double v : bundle.gauss[m]) put(v);
            for (std::uint32_t c : bundle.jump_counts[m]) put(static_cast<double>(c));
        }
        report["dump"] = cfg.out_path;
        std::cout << report.dump(2) << "\n";
        return kOk;
    }
    std::cout << report.dump(2) << "\n";
    return kOk;
}

int dispatch(const std::string& cmd, const RunConfig& cfg) {
    if (cmd == "lln") {
        json report = report_header("lln", cfg, "");
        report.erase("model");
        report.erase("model_hash");
        int code = kOk;
        std::vector<double> curve;
        report["lln"] = lln_section(cfg, code, &curve);
        if (cfg.plot)
            write_svg_curves(plot_path(cfg, "lln"), "tail P(|ratio| > 0.1) per doubling level",
                             {{"truncation_divergent", curve}});
        return emit(report, cfg, code);
    }

    LoadedModel lm = load_model(cfg.model_path);
    json report = report_header(cmd, cfg, lm.hash);
    int code = kOk;

    if (cmd == "validate") {
        report["validate"] = validate_section(lm);
        return emit(report, cfg, kOk);
    }
    if (cmd == "detect") {
        report["detect"] = detect_section(lm, cfg, code);
        return emit(report, cfg, code);
    }
    if (cmd == "solve") {
        ModelSolution sol;
        report["solve"] = solve_section(lm, sol);
        if (!cfg.out_path.empty()) {
            write_text(cfg.out_path, serialize_portfolio(sol.portfolio).dump(2) + "\n");
            std::cout << report.dump(2) << "\n";
            return kOk;
        }
        return emit(report, cfg, kOk);
    }
    if (cmd == "simulate") return run_simulate(lm, cfg);
    if (cmd == "verify") {
        ModelSolution sol;
        report["solve"] = solve_section(lm, sol);
        std::vector<double> zs;
        report["verify"] = verify_section(lm, sol, cfg, code, &zs);
        if (cfg.plot)
            write_svg_curves(plot_path(cfg, "verify"), "deflator z-scores per probe scale",
                             {{"z", zs}});
        return emit(report, cfg, code);
    }
    if (cmd == "measure-change") {
        ModelSolution sol;
        report["solve"] = solve_section(lm, sol);
        report["measure_change"] = measure_section(lm, sol, cfg, code);
        return emit(report, cfg, code);
    }
    if (cmd == "full") {
        report["validate"] = validate_section(lm);
        report["detect"] = detect_section(lm, cfg, code);
        if (code == kViolation) {
            // An arbitrage step has no growth optimum; stop after detection.
            report["note"] = "pipeline stopped: immediate arbitrage detected";
            return emit(report, cfg, code);
        }
        ModelSolution sol;
        report["solve"] = solve_section(lm, sol);
        std::vector<double> zs, curve;
        report["verify"] = verify_section(lm, sol, cfg, code, &zs);
        report["measure_change"] = measure_section(lm, sol, cfg, code);
        report["lln"] = lln_section(cfg, code, &curve);
        if (cfg.plot) {
            write_svg_curves(plot_path(cfg, "verify"), "deflator z-scores per probe scale",
                             {{"z", zs}});
            write_svg_curves(plot_path(cfg, "lln"), "tail P(|ratio| > 0.1) per doubling level",
                             {{"truncation_divergent", curve}});
        }
        return emit(report, cfg, code);
    }
    std::cerr << "unknown subcommand: " << cmd << "\n";
    return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"growth-optimal portfolio and martingale verification toolkit"};
    app.require_subcommand(1);
    RunConfig cfg;

    std::vector<CLI::App*> subs;
    for (const char* name : {"validate", "detect", "solve", "simulate", "verify",
                             "measure-change", "lln", "full"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--model", cfg.model_path, "model file (JSON)");
        sub->add_option("--out", cfg.out_path, "output file");
        sub->add_option("--seed", cfg.seed, "RNG seed")->check(CLI::PositiveNumber);
        sub->add_option("--paths", cfg.paths, "Monte Carlo paths")->check(CLI::PositiveNumber);
        sub->add_option("--epsilon", cfg.epsilon, "total-variation budget")
            ->check(CLI::PositiveNumber);
        sub->add_option("--tol", cfg.tol, "tolerance override")->check(CLI::PositiveNumber);
        sub->add_flag("--plot", cfg.plot, "emit SVG plots");
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd != "lln" && cfg.model_path.empty()) {
        std::cerr << "error: --model is required for " << cmd << "\n";
        return kUsage;
    }
    try {
        return dispatch(cmd, cfg);
    } catch (const ModelError& e) {
        json report;
        report["schema_version"] = kSchemaVersion;
        report["command"] = cmd;
        report["error"] = e.what();
        std::string text = report.dump(2) + "\n";
        if (!cfg.out_path.empty())
            write_text(cfg.out_path, text);
        else
            std::cout << text;
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIndeterminate;
    }
}
