#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace numkit {

constexpr const char* kSchemaVersion = "1";

class ModelError : public std::runtime_error {
  public:
    explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

enum class StepKind { continuous, predictable_jump };

inline std::string to_string(StepKind k) {
    return k == StepKind::continuous ? "continuous" : "predictable_jump";
}

struct JumpAtom {
    Eigen::VectorXd x;  // jump size, nonzero
    double k = 0.0;     // intensity per unit clock, positive
};

// Finite-support jump measure: a list of distinct nonzero atoms with
// positive intensities.
struct LevyAtomMeasure {
    std::vector<JumpAtom> atoms;

    static constexpr std::size_t kMaxAtoms = 1024;

    double total_intensity() const {
        double s = 0.0;
        for (const auto& a : atoms) s += a.k;
        return s;
    }

    void validate(Eigen::Index dim, const std::string& where) const {
        if (atoms.size() > kMaxAtoms)
            throw ModelError(where + ": atom count exceeds maximum " + std::to_string(kMaxAtoms));
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            const auto& a = atoms[i];
            if (a.x.size() != dim)
                throw ModelError(where + ": atom " + std::to_string(i) + " dimension mismatch");
            if (!a.x.allFinite() || !std::isfinite(a.k))
                throw ModelError(where + ": atom " + std::to_string(i) + " has non-finite entries");
            if (a.x.norm() == 0.0)
                throw ModelError(where + ": atom " + std::to_string(i) + " has zero jump size");
            if (a.k <= 0.0)
                throw ModelError(where + ": atom " + std::to_string(i) + " has nonpositive intensity");
            for (std::size_t j = i + 1; j < atoms.size(); ++j) {
                if ((a.x - atoms[j].x).norm() == 0.0)
                    throw ModelError(where + ": atoms " + std::to_string(i) + " and " +
                                     std::to_string(j) + " coincide");
            }
        }
    }
};

// Per-unit-of-clock characteristics (b, c, K) of one step. The drift b is
// kept in the untruncated convention.
struct LocalTriplet {
    Eigen::VectorXd b;
    Eigen::MatrixXd c;
    LevyAtomMeasure jumps;

    Eigen::Index dimension() const { return b.size(); }

    void validate(const std::string& where) const {
        const Eigen::Index d = b.size();
        if (!b.allFinite()) throw ModelError(where + ": drift has non-finite entries");
        if (c.rows() != d || c.cols() != d)
            throw ModelError(where + ": diffusion matrix is not " + std::to_string(d) + "x" +
                             std::to_string(d));
        if (!c.allFinite()) throw ModelError(where + ": diffusion matrix has non-finite entries");
        double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
        if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
            throw ModelError(where + ": diffusion matrix is not symmetric within 1e-12");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (c + c.transpose()));
        if (es.eigenvalues().minCoeff() < -1e-10)
            throw ModelError(where + ": diffusion matrix is not positive semidefinite (min eigenvalue " +
                             std::to_string(es.eigenvalues().minCoeff()) + ")");
        jumps.validate(d, where);
    }

    // Clip round-off negative eigenvalues in [-1e-10, 0) to zero.
    void clip_psd() {
        Eigen::MatrixXd sym = 0.5 * (c + c.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
        Eigen::VectorXd ev = es.eigenvalues();
        bool clipped = false;
        for (Eigen::Index i = 0; i < ev.size(); ++i) {
            if (ev(i) < 0.0 && ev(i) >= -1e-10) {
                ev(i) = 0.0;
                clipped = true;
            }
        }
        if (clipped) c = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    }
};

struct ClockStep {
    double t_end = 0.0;
    double delta_a = 0.0;
    StepKind kind = StepKind::continuous;
};

struct ClockGrid {
    std::vector<ClockStep> steps;  // t_0 = 0 implicit

    std::size_t size() const { return steps.size(); }

    double total_clock() const {
        double s = 0.0;
        for (const auto& st : steps) s += st.delta_a;
        return s;
    }
};

struct MarketModel {
    Eigen::Index dimension = 0;
    ClockGrid grid;
    std::vector<LocalTriplet> triplets;

    std::size_t n_steps() const { return grid.size(); }

    void validate() const {
        if (dimension < 1) throw ModelError("dimension must be >= 1");
        if (triplets.size() != grid.size())
            throw ModelError("triplet count does not match step count");
        double prev_t = 0.0;
        for (std::size_t m = 0; m < grid.size(); ++m) {
            const std::string where = "step " + std::to_string(m);
            const auto& st = grid.steps[m];
            if (!(st.t_end > prev_t))
                throw ModelError(where + ": times must be strictly increasing");
            prev_t = st.t_end;
            if (!(st.delta_a >= 0.0) || !std::isfinite(st.delta_a))
                throw ModelError(where + ": delta_a must be nonnegative and finite");
            const auto& tr = triplets[m];
            if (tr.dimension() != dimension) throw ModelError(where + ": dimension mismatch");
            tr.validate(where);
            if (st.kind == StepKind::predictable_jump &&
                st.delta_a * tr.jumps.total_intensity() > 1.0 + 1e-12)
                throw ModelError(where +
                                 ": predictable jump mass exceeds one (delta_a * K(R^d) <= 1 required)");
        }
        if (grid.total_clock() > 1.0 + 1e-12)
            throw ModelError("clock normalization A_T <= 1 violated (sum of delta_a = " +
                             std::to_string(grid.total_clock()) + ")");
    }
};

// Per-step investment weights; admissible when 1 + g.x > 0 for every atom.
struct Portfolio {
    std::vector<Eigen::VectorXd> weights;

    void validate(const MarketModel& model) const {
        if (weights.size() != model.n_steps())
            throw ModelError("portfolio step count does not match model");
        for (std::size_t m = 0; m < weights.size(); ++m) {
            if (weights[m].size() != model.dimension)
                throw ModelError("portfolio step " + std::to_string(m) + " dimension mismatch");
            for (const auto& a : model.triplets[m].jumps.atoms) {
                if (1.0 + weights[m].dot(a.x) <= 0.0)
                    throw ModelError("portfolio step " + std::to_string(m) +
                                     " leaves the admissible domain (1 + g.x <= 0)");
            }
        }
    }
};

enum class DriftDirection { to_untruncated, to_truncated };

// Converts between the truncated drift b_h and the untruncated drift
// b = b_h + sum_{|x|>1} k x. The two directions are exact inverses.
inline Eigen::VectorXd truncation_convert(const Eigen::VectorXd& drift, const LevyAtomMeasure& jumps,
                                          DriftDirection direction) {
    Eigen::VectorXd tail = Eigen::VectorXd::Zero(drift.size());
    for (const auto& a : jumps.atoms) {
        if (a.x.norm() > 1.0) tail += a.k * a.x;
    }
    return direction == DriftDirection::to_untruncated ? (drift + tail).eval()
                                                       : (drift - tail).eval();
}

// K(|x| ^ |x|^2) per step; always finite for finite atom lists. Logged so the
// standing integrability hypothesis is visible in reports.
inline std::vector<double> sigma_special_check(const MarketModel& model) {
    std::vector<double> out(model.n_steps(), 0.0);
    for (std::size_t m = 0; m < model.n_steps(); ++m) {
        double s = 0.0;
        for (const auto& a : model.triplets[m].jumps.atoms) {
            double nx = a.x.norm();
            s += a.k * std::min(nx, nx * nx);
        }
        out[m] = s;
    }
    return out;
}

namespace detail {

inline Eigen::VectorXd parse_vector(const nlohmann::json& j, Eigen::Index dim,
                                    const std::string& where) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != dim)
        throw ModelError(where + ": expected an array of " + std::to_string(dim) + " numbers");
    Eigen::VectorXd v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        if (!j[static_cast<std::size_t>(i)].is_number())
            throw ModelError(where + ": entry " + std::to_string(i) + " is not a number");
        v(i) = j[static_cast<std::size_t>(i)].get<double>();
    }
    return v;
}

}  // namespace detail

// Ingests the JSON model document, converts drifts to the untruncated
// convention, and validates every invariant.
inline MarketModel parse_model(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ModelError("model document must be a JSON object");
    if (!doc.contains("dimension") || !doc["dimension"].is_number_integer())
        throw ModelError("missing or non-integer field 'dimension'");
    MarketModel model;
    model.dimension = doc["dimension"].get<Eigen::Index>();
    if (model.dimension < 1) throw ModelError("dimension must be >= 1");
    if (!doc.contains("steps") || !doc["steps"].is_array())
        throw ModelError("missing or non-array field 'steps'");

    const Eigen::Index d = model.dimension;
    std::size_t m = 0;
    for (const auto& js : doc["steps"]) {
        const std::string where = "step " + std::to_string(m);
        if (!js.is_object()) throw ModelError(where + ": expected an object");
        ClockStep cs;
        if (!js.contains("t_end") || !js["t_end"].is_number())
            throw ModelError(where + ": missing numeric field 't_end'");
        cs.t_end = js["t_end"].get<double>();
        if (!js.contains("delta_a") || !js["delta_a"].is_number())
            throw ModelError(where + ": missing numeric field 'delta_a'");
        cs.delta_a = js["delta_a"].get<double>();
        std::string kind = js.value("kind", std::string("continuous"));
        if (kind == "continuous")
            cs.kind = StepKind::continuous;
        else if (kind == "predictable_jump")
            cs.kind = StepKind::predictable_jump;
        else
            throw ModelError(where + ": unknown step kind '" + kind + "'");

        LocalTriplet tr;
        if (js.contains("atoms")) {
            if (!js["atoms"].is_array()) throw ModelError(where + ": 'atoms' must be an array");
            for (const auto& ja : js["atoms"]) {
                if (!ja.is_object() || !ja.contains("x") || !ja.contains("k") ||
                    !ja["k"].is_number())
                    throw ModelError(where + ": each atom needs fields 'x' and numeric 'k'");
                JumpAtom atom;
                atom.x = detail::parse_vector(ja["x"], d, where + " atom x");
                atom.k = ja["k"].get<double>();
                tr.jumps.atoms.push_back(std::move(atom));
            }
        }
        std::string conv = js.value("drift_convention", std::string("untruncated"));
        if (conv == "untruncated") {
            if (!js.contains("b")) throw ModelError(where + ": missing field 'b'");
            tr.b = detail::parse_vector(js["b"], d, where + " b");
        } else if (conv == "truncated") {
            if (!js.contains("b_h")) throw ModelError(where + ": missing field 'b_h'");
            tr.b = truncation_convert(detail::parse_vector(js["b_h"], d, where + " b_h"), tr.jumps,
                                      DriftDirection::to_untruncated);
        } else {
            throw ModelError(where + ": unknown drift_convention '" + conv + "'");
        }
        if (!js.contains("c")) throw ModelError(where + ": missing field 'c'");
        Eigen::VectorXd flat = detail::parse_vector(js["c"], d * d, where + " c");
        tr.c = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            flat.data(), d, d);
        tr.clip_psd();

        model.grid.steps.push_back(cs);
        model.triplets.push_back(std::move(tr));
        ++m;
    }
    model.validate();
    return model;
}

// Normalized serialization: untruncated drift, explicit kind and convention.
inline nlohmann::json serialize_model(const MarketModel& model) {
    nlohmann::json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["dimension"] = model.dimension;
    doc["steps"] = nlohmann::json::array();
    for (std::size_t m = 0; m < model.n_steps(); ++m) {
        const auto& st = model.grid.steps[m];
        const auto& tr = model.triplets[m];
        nlohmann::json js;
        js["t_end"] = st.t_end;
        js["delta_a"] = st.delta_a;
        js["kind"] = to_string(st.kind);
        js["drift_convention"] = "untruncated";
        js["b"] = std::vector<double>(tr.b.data(), tr.b.data() + tr.b.size());
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> crm = tr.c;
        js["c"] = std::vector<double>(crm.data(), crm.data() + crm.size());
        js["atoms"] = nlohmann::json::array();
        for (const auto& a : tr.jumps.atoms) {
            nlohmann::json ja;
            ja["x"] = std::vector<double>(a.x.data(), a.x.data() + a.x.size());
            ja["k"] = a.k;
            js["atoms"].push_back(ja);
        }
        doc["steps"].push_back(js);
    }
    return doc;
}

inline nlohmann::json serialize_portfolio(const Portfolio& g) {
    nlohmann::json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["weights"] = nlohmann::json::array();
    for (const auto& w : g.weights)
        doc["weights"].push_back(std::vector<double>(w.data(), w.data() + w.size()));
    return doc;
}

inline Portfolio parse_portfolio(const nlohmann::json& doc, const MarketModel& model) {
    if (!doc.is_object() || !doc.contains("weights") || !doc["weights"].is_array())
        throw ModelError("portfolio document needs an array field 'weights'");
    Portfolio g;
    for (const auto& jw : doc["weights"])
        g.weights.push_back(detail::parse_vector(jw, model.dimension, "portfolio weights"));
    g.validate(model);
    return g;
}

}  // namespace numkit
