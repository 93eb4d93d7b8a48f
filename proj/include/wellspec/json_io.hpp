#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "wellspec/pipeline.hpp"
#include "wellspec/scmlab.hpp"

namespace wellspec {

using ordered_json = nlohmann::ordered_json;

inline const char* to_string(ResidualMode m) { return m == ResidualMode::kAnm ? "anm" : "lsnm"; }
inline const char* to_string(GMode g) { return g == GMode::kAbsolute ? "absolute" : "identity"; }
inline const char* to_string(RegressorKind k) {
    switch (k) {
        case RegressorKind::kBoostedTrees: return "boosted_trees";
        case RegressorKind::kKnn: return "knn";
        case RegressorKind::kConstantMean: return "constant_mean";
    }
    return "boosted_trees";
}

inline ordered_json regressor_to_json(const RegressorSpec& r) {
    ordered_json j;
    j["kind"] = to_string(r.kind);
    j["max_rounds"] = r.max_rounds;
    j["learning_rate"] = r.learning_rate;
    j["max_depth"] = r.max_depth;
    j["min_leaf"] = r.min_leaf;
    j["early_stop_patience"] = r.early_stop_patience;
    if (r.kind == RegressorKind::kKnn) j["k"] = r.k;
    return j;
}

// Report serialization with stable field names; `jobs` is echoed for
// traceability but never affects the numbers.
inline ordered_json report_to_json(const WellSpecReport& rep, std::size_t jobs, bool verbose) {
    ordered_json j;
    j["p0"] = rep.p0;
    j["alpha"] = rep.alpha;
    j["alpha_tilde"] = rep.alpha_tilde;
    j["B"] = rep.b_splits;
    j["mode"] = to_string(rep.mode);
    j["counts"] = rep.counts;
    j["n_bar"] = rep.n_bar;
    j["n_min"] = rep.n_min;
    ordered_json props = ordered_json::object();
    for (const auto& [idx, p] : rep.proportion_pvalues)
        props[rep.predictor_names[static_cast<std::size_t>(idx)]] = p;
    j["proportion_pvalues"] = props;
    ordered_json w = ordered_json::array();
    for (int idx : rep.w_hat) w.push_back(rep.predictor_names[static_cast<std::size_t>(idx)]);
    j["w_hat"] = w;
    j["all_variables"] = rep.all_variables;

    ordered_json cfg;
    cfg["target"] = rep.target_name;
    cfg["predictors"] = rep.predictor_names;
    cfg["mode"] = to_string(rep.mode);
    cfg["g"] = to_string(rep.g);
    cfg["B"] = rep.b_splits;
    cfg["alpha"] = rep.alpha;
    cfg["alpha_tilde"] = rep.alpha_tilde;
    cfg["seed"] = rep.master_seed;
    cfg["n_permutations"] = rep.options.n_perm;
    cfg["hsic_max_n"] = rep.options.hsic_max_n;
    cfg["hsic_calibration"] =
        rep.options.hsic_calibration == HsicCalibration::kPermutation ? "permutation" : "gamma";
    cfg["gamma_min"] = rep.options.gamma_min;
    cfg["big"] = rep.options.big;
    cfg["standardize_foci"] = rep.options.standardize_foci;
    cfg["jobs"] = jobs;
    cfg["regressor"] = regressor_to_json(rep.regressor);
    j["config"] = cfg;

    if (verbose) {
        ordered_json splits = ordered_json::array();
        for (const auto& r : rep.split_runs) {
            ordered_json s;
            s["b"] = r.b;
            s["swapped"] = r.swapped;
            s["p_b"] = r.p_b;
            ordered_json sel = ordered_json::array();
            for (int idx : r.s_hat) sel.push_back(rep.predictor_names[static_cast<std::size_t>(idx)]);
            s["s_hat"] = sel;
            s["fallback_count"] = r.fallback_count;
            splits.push_back(s);
        }
        j["splits"] = splits;
    }
    return j;
}

// ---------------------------------------------------------------------------
// ScmSpec from JSON
// ---------------------------------------------------------------------------
//
// {
//   "nodes": [
//     {"name": "H",  "noise": {"law": "normal", "variance": 1.0},
//      "mechanism": {"kind": "additive", "terms": []}},
//     {"name": "X1", "noise": {"law": "normal", "variance": 0.09},
//      "mechanism": {"kind": "additive",
//                    "terms": [{"parent": "H", "type": "sin", "amp": 1, "freq": 2.5}]}},
//     {"name": "Y",  "noise": {"law": "normal", "variance": 0},
//      "mechanism": {"kind": "scaled_parent", "scale_parent": "X2",
//                    "factor_parent": "H", "g0": 0.5}}
//   ],
//   "edges": [["H", "X1"], ...],
//   "observed": ["X1", "X2"],
//   "target": "Y",
//   "separable": true
// }
//
// term types: linear {coef}, sin {amp, freq},
//             power_sign {a1, b1, a2, b2} (a1 |x|^b1 sign x + a2 |x|^b2),
// each with an optional "scale" divisor.
inline ScmSpec scm_from_json(const ordered_json& j) {
    ScmSpec spec;
    if (!j.contains("nodes") || !j["nodes"].is_array() || j["nodes"].empty())
        throw input_error("scm json: missing 'nodes' array");
    for (const auto& node : j["nodes"]) spec.dag.names.push_back(node.at("name").get<std::string>());

    if (!j.contains("edges") || !j["edges"].is_array()) throw input_error("scm json: missing 'edges'");
    for (const auto& e : j["edges"]) {
        if (!e.is_array() || e.size() != 2) throw input_error("scm json: each edge is a [from, to] pair");
        spec.dag.edges.emplace_back(spec.dag.index_of(e[0].get<std::string>()),
                                    spec.dag.index_of(e[1].get<std::string>()));
    }
    if (!spec.dag.is_acyclic()) throw input_error("scm json: graph is not acyclic");

    const bool global_separable = j.value("separable", false);
    for (const auto& node : j["nodes"]) {
        NoiseLaw law;
        const auto& nj = node.at("noise");
        const std::string kind = nj.at("law").get<std::string>();
        if (kind == "normal") law.kind = NoiseLaw::Kind::kNormal;
        else if (kind == "uniform") law.kind = NoiseLaw::Kind::kUniform;
        else if (kind == "laplace") law.kind = NoiseLaw::Kind::kLaplace;
        else throw input_error("scm json: unknown noise law '" + kind + "'");
        law.variance = nj.at("variance").get<double>();
        if (law.variance < 0) throw input_error("scm json: negative noise variance");
        spec.noise.push_back(law);

        Mechanism mech;
        mech.separable = global_separable;
        if (node.contains("mechanism")) {
            const auto& mj = node["mechanism"];
            mech.separable = mj.value("separable", global_separable);
            const std::string mkind = mj.value("kind", "additive");
            if (mkind == "additive") {
                for (const auto& tj : mj.value("terms", ordered_json::array())) {
                    EdgeTerm t;
                    t.parent = spec.dag.index_of(tj.at("parent").get<std::string>());
                    const std::string type = tj.at("type").get<std::string>();
                    if (type == "linear") {
                        t.kind = EdgeTerm::Kind::kLinear;
                        t.coef = tj.value("coef", 1.0);
                    } else if (type == "sin") {
                        t.kind = EdgeTerm::Kind::kSin;
                        t.amp = tj.value("amp", 1.0);
                        t.freq = tj.value("freq", 1.0);
                    } else if (type == "power_sign") {
                        t.kind = EdgeTerm::Kind::kPowerSign;
                        t.a1 = tj.value("a1", 0.0);
                        t.b1 = tj.value("b1", 1.0);
                        t.a2 = tj.value("a2", 0.0);
                        t.b2 = tj.value("b2", 1.0);
                    } else {
                        throw input_error("scm json: unknown term type '" + type + "'");
                    }
                    t.scale = tj.value("scale", 1.0);
                    if (t.scale == 0.0) throw input_error("scm json: term scale must be nonzero");
                    mech.terms.push_back(t);
                }
            } else if (mkind == "scaled_parent") {
                mech.kind = Mechanism::Kind::kScaledParent;
                mech.scale_parent = spec.dag.index_of(mj.at("scale_parent").get<std::string>());
                mech.factor_parent = spec.dag.index_of(mj.at("factor_parent").get<std::string>());
                mech.g0 = mj.value("g0", 0.5);
            } else {
                throw input_error("scm json: unknown mechanism kind '" + mkind + "'");
            }
        }
        spec.mechanisms.push_back(mech);
    }

    spec.target = spec.dag.index_of(j.at("target").get<std::string>());
    if (!j.contains("observed") || !j["observed"].is_array())
        throw input_error("scm json: missing 'observed'");
    for (const auto& name : j["observed"]) spec.observed.push_back(spec.dag.index_of(name.get<std::string>()));
    spec.validate();
    return spec;
}

}  // namespace wellspec
