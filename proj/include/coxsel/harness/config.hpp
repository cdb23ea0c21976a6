#pragma once

#include "coxsel/datagen.hpp"
#include "coxsel/selective_inference.hpp"

#include <json.hpp>

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace coxsel::harness {

using json = nlohmann::json;

inline constexpr const char* kVersion =
#ifdef COXSEL_VERSION
    COXSEL_VERSION;
#else
    "0.0.0";
#endif

/// A data-generating scenario plus the descriptors written to every row.
struct ScenarioEntry
{
    Scenario scenario;
    int p = 0;
    std::string baseline;
    std::string pattern;
};

struct RunOptions
{
    int n_pop_truth = 200000;
    int cv_folds = 10;
    int n_lambda = 100;
    double lambda_eps = 0.0; // 0 = automatic
    int n_test = 0;          // 0 = same as n
    bool prediction = true;
    std::optional<double> fixed_lambda;
    int fix_n_pop = 20000;
    int fix_n_rep = 100;
    double nodewise_c = 1.0;
    bool debiased_sandwich = true;
    BicSampleSize bic_size = BicSampleSize::events;
    TargetKind debiased_target = TargetKind::full_model;
};

struct SimulationConfig
{
    std::vector<ScenarioEntry> scenarios;
    std::vector<Method> methods;
    std::vector<TuningRule> tuning_rules;
    std::vector<LassoFlavor> flavors;
    int gamma = 1;
    double alpha = 0.1;
    int n_sim = 1000;
    std::uint64_t seed = 1;
    RunOptions options;
    json source; // effective configuration (after overrides), used for the hash

    bool has(Method m) const { return std::find(methods.begin(), methods.end(), m) != methods.end(); }

    bool any_lasso_method() const
    {
        return std::any_of(methods.begin(), methods.end(), [](Method m) { return uses_lasso(m); });
    }

    SelectionOptions selection_options() const
    {
        SelectionOptions o;
        o.n_lambda = options.n_lambda;
        o.eps = options.lambda_eps;
        o.folds = options.cv_folds;
        o.gamma = gamma;
        o.bic_size = options.bic_size;
        return o;
    }
};

using WarningSink = std::function<void(const std::string&)>;

namespace detail {

[[noreturn]] inline void schema_error(const std::string& path, const std::string& what)
{
    throw Error("config " + path + ": " + what);
}

inline const json& require(const json& j, const std::string& key, const std::string& path)
{
    if (!j.is_object()) schema_error(path, "expected an object");
    const auto it = j.find(key);
    if (it == j.end()) schema_error(path + "." + key, "missing");
    return *it;
}

inline double as_number(const json& j, const std::string& path)
{
    if (!j.is_number()) schema_error(path, "expected a number");
    return j.get<double>();
}

inline int as_int(const json& j, const std::string& path)
{
    if (!j.is_number_integer()) schema_error(path, "expected an integer");
    return j.get<int>();
}

inline std::string as_string(const json& j, const std::string& path)
{
    if (!j.is_string()) schema_error(path, "expected a string");
    return j.get<std::string>();
}

inline const json& as_list(const json& j, const std::string& path)
{
    if (!j.is_array() || j.empty()) schema_error(path, "expected a nonempty list");
    return j;
}

/// Parses a factor list, dropping repeated values with a warning.
template <class T, class Parse>
std::vector<T> factor_list(const json& j, const std::string& path, Parse parse, const WarningSink& warn)
{
    std::vector<T> out;
    std::vector<json> seen;
    const auto& list = as_list(j, path);
    for (size_t k = 0; k < list.size(); ++k) {
        if (std::find(seen.begin(), seen.end(), list[k]) != seen.end()) {
            if (warn) warn("config " + path + ": duplicate value " + list[k].dump() + " ignored");
            continue;
        }
        seen.push_back(list[k]);
        out.push_back(parse(list[k], path + "[" + std::to_string(k) + "]"));
    }
    return out;
}

inline BaselineSpec parse_baseline(const json& j, const std::string& path, const json& scen, const std::string& spath)
{
    const auto name = as_string(j, path);
    if (name == "exponential") {
        double rate = 1.0;
        if (scen.contains("exponential")) {
            const auto& e = scen["exponential"];
            if (e.contains("rate")) rate = as_number(e["rate"], spath + ".exponential.rate");
        }
        return BaselineSpec::exponential(rate);
    }
    if (name == "weibull") {
        double shape = 2.0, scale = 1.0;
        if (scen.contains("weibull")) {
            const auto& w = scen["weibull"];
            if (w.contains("shape")) shape = as_number(w["shape"], spath + ".weibull.shape");
            if (w.contains("scale")) scale = as_number(w["scale"], spath + ".weibull.scale");
        }
        return BaselineSpec::weibull(shape, scale);
    }
    schema_error(path, "unknown baseline '" + name + "'");
}

inline CoefficientPattern parse_pattern(const json& j, const std::string& path)
{
    if (j.is_array()) {
        Vector v(static_cast<Eigen::Index>(j.size()));
        for (size_t k = 0; k < j.size(); ++k)
            v[static_cast<Eigen::Index>(k)] = as_number(j[k], path + "[" + std::to_string(k) + "]");
        return CoefficientPattern::from_vector(v);
    }
    try {
        return CoefficientPattern::parse(as_string(j, path));
    } catch (const Error& e) {
        schema_error(path, e.what());
    }
}

inline IndexList parse_one_based_list(const json& j, const std::string& path)
{
    if (!j.is_array()) schema_error(path, "expected a list of one-based column indices");
    IndexList out;
    for (size_t k = 0; k < j.size(); ++k) {
        const int v = as_int(j[k], path + "[" + std::to_string(k) + "]");
        if (v < 1) schema_error(path + "[" + std::to_string(k) + "]", "indices are one-based");
        out.push_back(v - 1);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

} // namespace detail

/// Calibrated scenario file: names, beta, Weibull (shape, scale), censoring
/// proportion and the covariate pool as a list of rows.
inline json calibrated_to_json(const CalibratedScenario& cal)
{
    json j;
    j["names"] = cal.names;
    j["beta"] = std::vector<double>(cal.beta_truth.data(), cal.beta_truth.data() + cal.beta_truth.size());
    j["weibull"] = {{"shape", cal.baseline.shape}, {"scale", cal.baseline.scale}};
    j["censor_target"] = cal.censor_target;
    json pool = json::array();
    for (Eigen::Index i = 0; i < cal.covariate_pool.rows(); ++i) {
        std::vector<double> row(static_cast<size_t>(cal.covariate_pool.cols()));
        for (Eigen::Index c = 0; c < cal.covariate_pool.cols(); ++c) row[static_cast<size_t>(c)] = cal.covariate_pool(i, c);
        pool.push_back(row);
    }
    j["pool"] = pool;
    return j;
}

inline CalibratedScenario calibrated_from_json(const json& j, const std::string& path)
{
    using namespace detail;
    CalibratedScenario cal;
    const auto& beta = as_list(require(j, "beta", path), path + ".beta");
    cal.beta_truth.resize(static_cast<Eigen::Index>(beta.size()));
    for (size_t k = 0; k < beta.size(); ++k)
        cal.beta_truth[static_cast<Eigen::Index>(k)] = as_number(beta[k], path + ".beta[" + std::to_string(k) + "]");
    const auto& w = require(j, "weibull", path);
    cal.baseline = BaselineSpec::weibull(as_number(require(w, "shape", path + ".weibull"), path + ".weibull.shape"),
                                         as_number(require(w, "scale", path + ".weibull"), path + ".weibull.scale"));
    cal.censor_target = as_number(require(j, "censor_target", path), path + ".censor_target");
    const auto& pool = as_list(require(j, "pool", path), path + ".pool");
    const auto p = cal.beta_truth.size();
    cal.covariate_pool.resize(static_cast<Eigen::Index>(pool.size()), p);
    for (size_t i = 0; i < pool.size(); ++i) {
        const std::string rp = path + ".pool[" + std::to_string(i) + "]";
        if (!pool[i].is_array() || static_cast<Eigen::Index>(pool[i].size()) != p)
            schema_error(rp, "expected a row of " + std::to_string(p) + " numbers");
        for (Eigen::Index c = 0; c < p; ++c)
            cal.covariate_pool(static_cast<Eigen::Index>(i), c) = as_number(pool[i][static_cast<size_t>(c)], rp);
    }
    if (j.contains("names")) cal.names = j["names"].get<std::vector<std::string>>();
    return cal;
}

/// Cartesian expansion of the scenario factor lists. `base_dir` resolves
/// relative calibrated-scenario file names.
inline std::vector<ScenarioEntry> expand_grid(const json& scen, const std::string& base_dir = ".",
                                              const WarningSink& warn = {})
{
    using namespace detail;
    const std::string path = "scenarios";
    if (!scen.is_object()) schema_error(path, "expected an object");
    std::vector<ScenarioEntry> out;

    const bool has_toy = scen.contains("n") || scen.contains("p") || scen.contains("pattern");
    if (has_toy) {
        const auto ns = factor_list<int>(require(scen, "n", path), path + ".n", as_int, warn);
        const auto ps = factor_list<int>(require(scen, "p", path), path + ".p", as_int, warn);
        const auto rhos = factor_list<double>(require(scen, "rho", path), path + ".rho", as_number, warn);
        const auto pcs =
            factor_list<double>(require(scen, "censor_target", path), path + ".censor_target", as_number, warn);
        const auto bases = factor_list<BaselineSpec>(
            require(scen, "baseline", path), path + ".baseline",
            [&](const json& j, const std::string& pth) { return parse_baseline(j, pth, scen, path); }, warn);
        const auto pats =
            factor_list<CoefficientPattern>(require(scen, "pattern", path), path + ".pattern", parse_pattern, warn);
        std::vector<IndexList> dichs{{}};
        if (scen.contains("dichotomize"))
            dichs = factor_list<IndexList>(scen["dichotomize"], path + ".dichotomize", parse_one_based_list, warn);

        for (int n : ns)
            for (int p : ps)
                for (double rho : rhos)
                    for (double pc : pcs)
                        for (const auto& b : bases)
                            for (const auto& pat : pats)
                                for (const auto& d : dichs) {
                                    ToyScenario toy{n, p, rho, pc, b, pat, d};
                                    try {
                                        out.push_back({make_scenario(toy), p, b.name(), pat.name()});
                                    } catch (const Error& e) {
                                        schema_error(path, std::string("scenario ") + toy.id() + ": " + e.what());
                                    }
                                }
    }

    if (scen.contains("calibrated")) {
        const auto& list = as_list(scen["calibrated"], path + ".calibrated");
        for (size_t k = 0; k < list.size(); ++k) {
            const std::string cp = path + ".calibrated[" + std::to_string(k) + "]";
            const auto file = as_string(require(list[k], "file", cp), cp + ".file");
            const std::string full = (!file.empty() && file[0] == '/') ? file : base_dir + "/" + file;
            std::ifstream in(full);
            if (!in) schema_error(cp + ".file", "cannot open '" + full + "'");
            json cj;
            try {
                in >> cj;
            } catch (const json::exception& e) {
                schema_error(cp + ".file", e.what());
            }
            const auto cal = calibrated_from_json(cj, file);
            std::string label = list[k].contains("name") ? as_string(list[k]["name"], cp + ".name") : "calibrated";
            const auto ns = factor_list<int>(require(list[k], "n", cp), cp + ".n", as_int, warn);
            std::vector<double> pcs{cal.censor_target};
            if (list[k].contains("censor_target"))
                pcs = factor_list<double>(list[k]["censor_target"], cp + ".censor_target", as_number, warn);
            for (int n : ns)
                for (double pc : pcs) {
                    auto c = cal;
                    c.censor_target = pc;
                    char buf[64];
                    std::snprintf(buf, sizeof buf, "_n%d_pc%g", n, pc);
                    ScenarioEntry e{make_scenario(c, n, label + buf), static_cast<int>(cal.beta_truth.size()),
                                    "weibull", label};
                    if (!(pc >= 0.0 && pc < 1.0)) schema_error(cp + ".censor_target", "must lie in [0,1)");
                    out.push_back(std::move(e));
                }
        }
    }
    if (out.empty()) schema_error(path, "no scenarios defined");

    std::set<std::string> ids;
    for (const auto& e : out)
        if (!ids.insert(e.scenario.id).second) schema_error(path, "duplicate scenario id '" + e.scenario.id + "'");
    return out;
}

inline SimulationConfig parse_config(json j, const std::string& base_dir = ".", const WarningSink& warn = {})
{
    using namespace detail;
    if (!j.is_object()) schema_error("<root>", "expected an object");
    SimulationConfig cfg;
    cfg.scenarios = expand_grid(require(j, "scenarios", "<root>"), base_dir, warn);

    cfg.methods = factor_list<Method>(
        require(j, "methods", "<root>"), "methods",
        [](const json& v, const std::string& pth) {
            try {
                return parse_method(as_string(v, pth));
            } catch (const Error& e) {
                schema_error(pth, e.what());
            }
        },
        warn);
    std::vector<TuningRule> rules{TuningRule::parse("cv_min")};
    if (j.contains("tuning_rules"))
        rules = factor_list<TuningRule>(
            j["tuning_rules"], "tuning_rules",
            [](const json& v, const std::string& pth) {
                try {
                    return TuningRule::parse(as_string(v, pth));
                } catch (const Error& e) {
                    schema_error(pth, e.what());
                }
            },
            warn);
    // "min" and "cv_min" name the same rule.
    std::vector<TuningRule> unique_rules;
    for (const auto& r : rules)
        if (std::none_of(unique_rules.begin(), unique_rules.end(), [&](const TuningRule& u) { return u.kind == r.kind; }))
            unique_rules.push_back(r);
        else if (warn)
            warn("config tuning_rules: duplicate rule '" + r.name() + "' ignored");
    cfg.tuning_rules = unique_rules;

    cfg.flavors = {LassoFlavor::standard};
    if (j.contains("lasso")) {
        const auto& l = j["lasso"];
        if (!l.is_object()) schema_error("lasso", "expected an object");
        if (l.contains("flavors")) {
            cfg.flavors = factor_list<LassoFlavor>(
                l["flavors"], "lasso.flavors",
                [](const json& v, const std::string& pth) {
                    try {
                        return parse_flavor(as_string(v, pth));
                    } catch (const Error& e) {
                        schema_error(pth, e.what());
                    }
                },
                warn);
        } else if (l.contains("standard") || l.contains("adaptive")) {
            cfg.flavors.clear();
            for (const auto* name : {"standard", "adaptive"}) {
                if (!l.contains(name)) continue;
                if (!l[name].is_boolean()) schema_error(std::string("lasso.") + name, "expected true or false");
                if (l[name].get<bool>()) cfg.flavors.push_back(parse_flavor(name));
            }
            if (cfg.flavors.empty()) schema_error("lasso", "no lasso flavor enabled");
        }
        if (l.contains("gamma")) {
            cfg.gamma = as_int(l["gamma"], "lasso.gamma");
            if (cfg.gamma < 1) schema_error("lasso.gamma", "must be a positive integer");
        }
    }
    if (j.contains("alpha")) cfg.alpha = as_number(j["alpha"], "alpha");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) schema_error("alpha", "must lie in (0,1)");
    if (j.contains("n_sim")) cfg.n_sim = as_int(j["n_sim"], "n_sim");
    if (cfg.n_sim < 1) schema_error("n_sim", "must be positive");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) schema_error("seed", "expected an integer");
        cfg.seed = j["seed"].get<std::uint64_t>();
    }

    if (j.contains("options")) {
        const auto& o = j["options"];
        if (!o.is_object()) schema_error("options", "expected an object");
        auto& opt = cfg.options;
        const auto int_opt = [&](const char* key, int& dst, int min) {
            if (!o.contains(key)) return;
            dst = as_int(o[key], std::string("options.") + key);
            if (dst < min) schema_error(std::string("options.") + key, "must be at least " + std::to_string(min));
        };
        int_opt("n_pop_truth", opt.n_pop_truth, 100);
        int_opt("cv_folds", opt.cv_folds, 2);
        int_opt("n_lambda", opt.n_lambda, 2);
        int_opt("n_test", opt.n_test, 0);
        int_opt("fix_n_pop", opt.fix_n_pop, 10);
        int_opt("fix_n_rep", opt.fix_n_rep, 1);
        if (o.contains("lambda_eps")) opt.lambda_eps = as_number(o["lambda_eps"], "options.lambda_eps");
        if (o.contains("prediction")) {
            if (!o["prediction"].is_boolean()) schema_error("options.prediction", "expected true or false");
            opt.prediction = o["prediction"].get<bool>();
        }
        if (o.contains("fixed_lambda") && !o["fixed_lambda"].is_null()) {
            opt.fixed_lambda = as_number(o["fixed_lambda"], "options.fixed_lambda");
            if (!(*opt.fixed_lambda >= 0.0)) schema_error("options.fixed_lambda", "must be nonnegative");
        }
        if (o.contains("nodewise_c")) opt.nodewise_c = as_number(o["nodewise_c"], "options.nodewise_c");
        if (o.contains("debiased_variance")) {
            const auto s = as_string(o["debiased_variance"], "options.debiased_variance");
            if (s == "sandwich") opt.debiased_sandwich = true;
            else if (s == "theta") opt.debiased_sandwich = false;
            else schema_error("options.debiased_variance", "expected 'sandwich' or 'theta'");
        }
        if (o.contains("bic_sample_size")) {
            const auto s = as_string(o["bic_sample_size"], "options.bic_sample_size");
            if (s == "events") opt.bic_size = BicSampleSize::events;
            else if (s == "n") opt.bic_size = BicSampleSize::n;
            else schema_error("options.bic_sample_size", "expected 'events' or 'n'");
        }
        if (o.contains("debiased_target")) {
            const auto s = as_string(o["debiased_target"], "options.debiased_target");
            if (s == "full_model") opt.debiased_target = TargetKind::full_model;
            else if (s == "submodel") opt.debiased_target = TargetKind::submodel;
            else schema_error("options.debiased_target", "expected 'full_model' or 'submodel'");
        }
    }
    cfg.source = std::move(j);
    return cfg;
}

inline SimulationConfig load_config(const std::string& file, const WarningSink& warn = {})
{
    std::ifstream in(file);
    if (!in) throw Error("cannot open config '" + file + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error("config '" + file + "': " + e.what());
    }
    const auto slash = file.find_last_of('/');
    return parse_config(std::move(j), slash == std::string::npos ? "." : file.substr(0, slash), warn);
}

/// Applies command-line overrides to the stored configuration as well, so
/// the hash reflects what was actually run.
inline void override_seed(SimulationConfig& cfg, std::uint64_t seed)
{
    cfg.seed = seed;
    cfg.source["seed"] = seed;
}

inline void override_n_sim(SimulationConfig& cfg, int n_sim)
{
    if (n_sim < 1) throw Error("n_sim must be positive");
    cfg.n_sim = n_sim;
    cfg.source["n_sim"] = n_sim;
}

inline std::string config_hash(const SimulationConfig& cfg)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(cfg.source.dump())));
    return buf;
}

} // namespace coxsel::harness
