#pragma once

// ExperimentConfig <-> JSON. Unknown keys are rejected so that typos in a
// config file do not silently fall back to defaults.

#include "shuber/experiment.hpp"

#include <set>

namespace shuber {

namespace detail {

inline void reject_unknown(const io::json& j, const std::set<std::string>& known, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
}

inline std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty())
            continue;
        std::size_t used = 0;
        const double v = std::stod(item, &used);
        if (used != item.size())
            throw std::invalid_argument("bad number in list: " + item);
        out.push_back(v);
    }
    if (out.empty())
        throw std::invalid_argument("empty list: " + text);
    return out;
}

} // namespace detail

inline char preset_id_from_string(const std::string& s) {
    if (s.size() != 1 || s[0] < 'a' || s[0] > 'k')
        throw std::invalid_argument("preset id must be one of a..k, got '" + s + "'");
    return s[0];
}

inline StepRule step_rule_from_string(const std::string& s) {
    if (s == "FIXED_LIPSCHITZ") return StepRule::FIXED_LIPSCHITZ;
    if (s == "BACKTRACKING") return StepRule::BACKTRACKING;
    throw std::invalid_argument("unknown step rule: " + s);
}

inline BoxProx box_prox_from_string(const std::string& s) {
    if (s == "EXACT") return BoxProx::EXACT;
    if (s == "SVT_THEN_CLIP") return BoxProx::SVT_THEN_CLIP;
    throw std::invalid_argument("unknown box prox: " + s);
}

/// Applies the keys present in `j` on top of `cfg`.
inline void apply_json(ExperimentConfig& cfg, const io::json& j) {
    detail::reject_unknown(j,
                           {"preset", "desk", "seed", "reps", "eps_grid", "n", "p", "d1", "d2", "s", "r", "sigma",
                            "entry_value", "outlier_value", "spikeness_a", "gamma_value", "variants", "structures",
                            "mode", "workers", "tuning", "solver"},
                           "config");
    PresetOverrides& o = cfg.overrides;
    if (j.contains("preset")) cfg.preset_id = preset_id_from_string(j["preset"].get<std::string>());
    if (j.contains("desk")) cfg.desk = j["desk"].get<bool>();
    if (j.contains("seed")) cfg.master_seed = j["seed"].get<std::uint64_t>();
    if (j.contains("workers")) cfg.workers = j["workers"].get<unsigned>();
    if (j.contains("reps")) o.reps = j["reps"].get<Index>();
    if (j.contains("n")) o.n = j["n"].get<Index>();
    if (j.contains("p")) o.p = j["p"].get<Index>();
    if (j.contains("d1")) o.d1 = j["d1"].get<Index>();
    if (j.contains("d2")) o.d2 = j["d2"].get<Index>();
    if (j.contains("s")) o.s = j["s"].get<Index>();
    if (j.contains("r")) o.r = j["r"].get<Index>();
    if (j.contains("sigma")) o.sigma = j["sigma"].get<double>();
    if (j.contains("entry_value")) o.entry_value = j["entry_value"].get<double>();
    if (j.contains("outlier_value")) o.outlier_value = j["outlier_value"].get<double>();
    if (j.contains("spikeness_a")) o.spikeness_a = j["spikeness_a"].get<double>();
    if (j.contains("gamma_value")) o.gamma_value = j["gamma_value"].get<double>();
    if (j.contains("eps_grid")) o.eps_grid = j["eps_grid"].get<std::vector<double>>();
    if (j.contains("variants")) {
        std::vector<Variant> v;
        for (const auto& x : j["variants"])
            v.push_back(variant_from_string(x.get<std::string>()));
        o.variants = v;
    }
    if (j.contains("structures")) {
        std::vector<StructurePoint> v;
        for (const auto& x : j["structures"])
            v.push_back({x.value("r", Index{0}), x.value("s", Index{0})});
        o.structures = v;
    }
    if (j.contains("mode")) cfg.mode = mode_from_string(j["mode"].get<std::string>());
    if (j.contains("tuning")) {
        const io::json& t = j["tuning"];
        detail::reject_unknown(t, {"lambda", "chi", "tau", "c_lambda", "c_chi", "c_tau", "L", "C1", "rho",
                                   "sigma_guess", "A", "A_bar"},
                               "tuning");
        TuningSpec& ts = cfg.tuning;
        if (t.contains("lambda")) ts.lambda = t["lambda"].get<double>();
        if (t.contains("chi")) ts.chi = t["chi"].get<double>();
        if (t.contains("tau")) ts.tau = t["tau"].get<double>();
        if (t.contains("c_lambda")) ts.constants.c_lambda = t["c_lambda"].get<double>();
        if (t.contains("c_chi")) ts.constants.c_chi = t["c_chi"].get<double>();
        if (t.contains("c_tau")) ts.constants.c_tau = t["c_tau"].get<double>();
        if (t.contains("L")) ts.constants.lip = t["L"].get<double>();
        if (t.contains("C1")) ts.constants.c1 = t["C1"].get<double>();
        if (t.contains("rho")) ts.constants.rho = t["rho"].get<double>();
        if (t.contains("sigma_guess")) ts.sigma_guess = t["sigma_guess"].get<double>();
        if (t.contains("A")) ts.a_theta = t["A"].get<double>();
        if (t.contains("A_bar")) ts.a_reg = t["A_bar"].get<double>();
    }
    if (j.contains("solver")) {
        const io::json& s = j["solver"];
        detail::reject_unknown(s, {"max_sweeps", "tol_rel_obj", "tol_kkt", "step_rule", "box_prox"}, "solver");
        SolverOptions& so = cfg.solver;
        if (s.contains("max_sweeps")) so.max_sweeps = s["max_sweeps"].get<int>();
        if (s.contains("tol_rel_obj")) so.tol_rel_obj = s["tol_rel_obj"].get<double>();
        if (s.contains("tol_kkt")) so.tol_kkt = s["tol_kkt"].get<double>();
        if (s.contains("step_rule")) so.step_rule = step_rule_from_string(s["step_rule"].get<std::string>());
        if (s.contains("box_prox")) so.box_prox = box_prox_from_string(s["box_prox"].get<std::string>());
    }
}

inline ExperimentConfig config_from_json(const io::json& j) {
    ExperimentConfig cfg;
    apply_json(cfg, j);
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot read config file: " + path.string());
    return config_from_json(io::json::parse(in));
}

} // namespace shuber
