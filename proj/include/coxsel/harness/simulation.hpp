#pragma once

#include "coxsel/harness/calibrate.hpp"
#include "coxsel/harness/config.hpp"
#include "coxsel/harness/csv.hpp"
#include "coxsel/metrics.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <iostream>
#include <thread>

namespace coxsel::harness {

namespace fs = std::filesystem;

struct RuntimeRecord
{
    std::string scenario_id;
    int iteration = 0;
    std::string flavor;
    std::string method;
    std::string tuning;
    double seconds = 0.0;

    auto tie() const { return std::tie(scenario_id, iteration, flavor, method, tuning); }
};

struct IterationOutput
{
    std::vector<IntervalRecord> records;
    std::vector<RuntimeRecord> runtimes;
};

/// Fixed-rule lambdas per Lasso flavor for one scenario.
using FixedLambdas = std::map<LassoFlavor, double>;

namespace detail {

class Stopwatch
{
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline std::string join_flags(const InferenceResult& res, bool selection_not_converged)
{
    std::vector<std::string> f;
    if (res.separation) f.push_back("separation");
    if (res.not_converged || selection_not_converged) f.push_back("not_converged");
    if (res.split_no_events) f.push_back("split_no_events");
    if (res.singular) f.push_back("singular");
    std::string s;
    for (const auto& x : f) s += (s.empty() ? "" : ";") + x;
    return s;
}

inline bool contains(const IndexList& set, int j)
{
    return std::find(set.begin(), set.end(), j) != set.end();
}

struct Prediction
{
    double ibs = kNaN;
    double cindex = kNaN;
};

/// IBS and C-index on the test set of an unpenalized Cox refit on `set`.
inline Prediction predict_with(const SurvivalDataset& train, const SurvivalDataset& test, const IndexList& set)
{
    Vector beta = Vector::Zero(static_cast<Eigen::Index>(set.size()));
    if (!set.empty()) {
        try {
            beta = fit_cox_mle(train, set).beta;
        } catch (const Error&) {
            return {};
        }
    }
    if (!beta.allFinite()) return {};
    const auto base = breslow_baseline(train, beta, set);
    Vector lp = Vector::Zero(test.n());
    for (size_t k = 0; k < set.size(); ++k) lp += beta[static_cast<Eigen::Index>(k)] * test.x().col(set[k]);
    const Vector rel = lp.array().exp();
    const auto g = km_censoring_survivor(test);
    Prediction out;
    out.ibs = integrated_brier(test, [&](int i, double t) { return std::exp(-base.at(t) * rel[i]); }, g).ibs;
    out.cindex = harrell_cindex(test, lp);
    return out;
}

} // namespace detail

/// Everything an iteration needs besides its index.
struct IterationContext
{
    const SimulationConfig& config;
    const ScenarioEntry& entry;
    SubmodelTruthCache& truth;
    const FixedLambdas& fixed;
    bool inline_timings = false;
};

/// One replicate: generate data, run every configured method under every
/// flavor and tuning rule, and emit one row per (method cell, coefficient).
inline IterationOutput run_iteration(const IterationContext& ctx, int iteration)
{
    const auto& cfg = ctx.config;
    const auto& sc = ctx.entry.scenario;
    const int p = sc.p();
    const std::uint64_t seed = derive_seed(cfg.seed, sc.id, static_cast<std::uint64_t>(iteration));
    Rng rng(seed);
    const auto train = generate(sc, rng).data;
    const auto z = train.standardized();
    const auto& st = z.standardization();
    const IndexList truly_active = sc.true_active();

    std::optional<SurvivalDataset> test;
    if (cfg.options.prediction) {
        Rng trng(derive_seed(seed, "test", 0));
        test = generate(sc, cfg.options.n_test > 0 ? cfg.options.n_test : sc.n, trng).data;
    }
    std::map<IndexList, detail::Prediction> predictions;
    const auto predict = [&](const IndexList& set) -> detail::Prediction {
        if (!test) return {};
        auto it = predictions.find(set);
        if (it == predictions.end()) it = predictions.emplace(set, detail::predict_with(train, *test, set)).first;
        return it->second;
    };

    // Submodel truths on the original covariate scale, NaN where unavailable.
    bool truth_failed = false;
    const auto submodel_target = [&](const IndexList& set) {
        Vector t = Vector::Constant(p, kNaN);
        if (set.empty()) return t;
        try {
            const Vector b = ctx.truth.get(sc, set);
            for (size_t k = 0; k < set.size(); ++k) t[set[k]] = b[static_cast<Eigen::Index>(k)];
        } catch (const Error&) {
            truth_failed = true;
        }
        return t;
    };

    IterationOutput out;
    const auto emit = [&](const std::string& flavor, Method method, const std::string& tuning, const IndexList& selected,
                          const InferenceResult* res, const Vector& target, TargetKind kind, std::string flags,
                          double seconds) {
        if (truth_failed) flags += (flags.empty() ? "" : ";") + std::string("truth_failed");
        truth_failed = false;
        const auto pred = predict(selected);
        const double pt = p_true(selected, truly_active);
        out.runtimes.push_back({sc.id, iteration, flavor, method_name(method), tuning, seconds});
        for (int j = 0; j < p; ++j) {
            IntervalRecord r;
            r.scenario_id = sc.id;
            r.n = sc.n;
            r.p = p;
            r.rho = sc.pool ? kNaN : sc.rho;
            r.censor_target = sc.censor_target;
            r.baseline = ctx.entry.baseline;
            r.pattern = ctx.entry.pattern;
            r.flavor = flavor;
            r.method = method_name(method);
            r.tuning = tuning;
            r.iteration = iteration;
            r.coef_index = j + 1;
            r.selected = detail::contains(selected, j);
            r.beta0 = sc.beta[j];
            const SelectiveInterval* iv = res ? res->find(j) : nullptr;
            // Debiased intervals exist for every coefficient but are reported for the selected ones.
            if (iv && (method != Method::debiased || r.selected)) {
                r.reported = true;
                r.estimate = iv->estimate;
                r.lower = iv->lower;
                r.upper = iv->upper;
                r.degenerate = iv->degenerate;
                r.target_kind = target_name(kind);
                r.target_value = kind == TargetKind::full_model ? sc.beta[j] : target[j];
            }
            r.runtime_seconds = ctx.inline_timings ? seconds : kNaN;
            r.model_size = static_cast<int>(selected.size());
            r.p_true = pt;
            r.ibs = pred.ibs;
            r.cindex = pred.cindex;
            r.flags = flags;
            score_record(r);
            out.records.push_back(std::move(r));
        }
    };
    const Vector no_target = Vector::Constant(p, kNaN);

    if (cfg.has(Method::full)) {
        detail::Stopwatch sw;
        auto res = infer_full(z, cfg.alpha);
        to_original_scale(res, st);
        emit("none", Method::full, "none", all_indices(p), &res, no_target, TargetKind::full_model,
             detail::join_flags(res, false), sw.seconds());
    }
    if (cfg.has(Method::oracle)) {
        detail::Stopwatch sw;
        InferenceResult res;
        res.method = Method::oracle;
        if (!truly_active.empty()) {
            res = infer_oracle(z, truly_active, cfg.alpha);
            to_original_scale(res, st);
        }
        const double secs = sw.seconds();
        emit("none", Method::oracle, "none", truly_active, &res, submodel_target(truly_active), TargetKind::submodel,
             detail::join_flags(res, false), secs);
    }

    const auto sel_opt = cfg.selection_options();
    for (LassoFlavor flavor : cfg.flavors) {
        const std::string fname = flavor_name(flavor);
        for (TuningRule rule : cfg.tuning_rules) {
            const std::string tname = rule.name();
            if (rule.kind == TuningRule::Kind::fixed) {
                const auto it = ctx.fixed.find(flavor);
                if (it == ctx.fixed.end()) throw Error("run_iteration: no fixed lambda for flavor " + fname);
                rule.fixed_lambda = it->second;
            }

            const bool need_selection = std::any_of(cfg.methods.begin(), cfg.methods.end(), [](Method m) {
                return uses_lasso(m) && m != Method::split;
            });
            std::optional<SelectionResult> sel;
            double sel_seconds = 0.0;
            if (need_selection) {
                Rng srng(derive_seed(seed, "select|" + fname + "|" + tname, 0));
                detail::Stopwatch sw;
                try {
                    sel = select_model(z, flavor, rule, srng, sel_opt);
                } catch (const Error&) {
                    sel.reset();
                }
                sel_seconds = sw.seconds();
            }

            for (Method m : cfg.methods) {
                if (!uses_lasso(m)) continue;
                if (m == Method::split) {
                    Rng sprng(derive_seed(seed, "split|" + fname + "|" + tname, 0));
                    SplitSelection spec{flavor, rule, sel_opt};
                    // lambda is on the summed log-likelihood scale: halve it for the half sample
                    spec.rule.fixed_lambda = rule.fixed_lambda * 0.5;
                    std::optional<SelectionEvent> ev;
                    detail::Stopwatch sw;
                    auto res = infer_split(z, spec, cfg.alpha, sprng, &ev);
                    to_original_scale(res, st);
                    const double secs = sw.seconds();
                    const IndexList selected = ev ? ev->active : IndexList{};
                    emit(fname, m, tname, selected, &res, submodel_target(selected), TargetKind::submodel,
                         detail::join_flags(res, false), secs);
                    continue;
                }
                if (!sel) {
                    emit(fname, m, tname, {}, nullptr, no_target, TargetKind::submodel, "selection_failed", sel_seconds);
                    continue;
                }
                const auto& fit = sel->fit;
                detail::Stopwatch sw;
                InferenceResult res;
                TargetKind kind = TargetKind::submodel;
                switch (m) {
                case Method::refit: res = infer_refit(z, SelectionEvent::from(fit, sel->weights), cfg.alpha); break;
                case Method::refit0: res = infer_refit0(z, fit, cfg.alpha); break;
                case Method::exact_psi: res = infer_exact_psi(z, fit, sel->weights, cfg.alpha); break;
                case Method::debiased: {
                    NodewiseRule nr;
                    nr.c = cfg.options.nodewise_c;
                    nr.sandwich = cfg.options.debiased_sandwich;
                    const auto nw = estimate_nodewise_inverse(z, fit.beta, nr);
                    res = infer_debiased(z, fit, nw, cfg.alpha, nr.sandwich);
                    kind = cfg.options.debiased_target;
                    break;
                }
                default: break;
                }
                to_original_scale(res, st);
                const double secs = sel_seconds + sw.seconds();
                const Vector target = kind == TargetKind::submodel ? submodel_target(fit.active) : no_target;
                emit(fname, m, tname, fit.active, &res, target, kind, detail::join_flags(res, !fit.converged), secs);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Grid runner
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& runtime_header()
{
    static const std::vector<std::string> h{"scenario_id", "iteration", "lasso_flavor", "method", "tuning", "seconds"};
    return h;
}

inline void write_atomic(const fs::path& path, const std::string& content)
{
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out << content;
        if (!out) throw Error("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

/// Per-scenario completion record persisted next to the results.
struct Manifest
{
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string version = kVersion;
    int n_sim = 0;
    bool finished = false;
    struct Entry
    {
        std::string id;
        std::string status = "pending";
        double wall_clock_seconds = kNaN;
    };
    std::vector<Entry> scenarios;

    json to_json() const
    {
        json j;
        j["config_hash"] = config_hash;
        j["seed"] = seed;
        j["version"] = version;
        j["n_sim"] = n_sim;
        j["finished"] = finished;
        j["scenarios"] = json::array();
        for (const auto& e : scenarios) {
            json s{{"id", e.id}, {"status", e.status}};
            s["wall_clock_seconds"] = std::isnan(e.wall_clock_seconds) ? json(nullptr) : json(e.wall_clock_seconds);
            j["scenarios"].push_back(s);
        }
        return j;
    }

    static Manifest from_json(const json& j)
    {
        Manifest m;
        m.config_hash = j.at("config_hash").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.version = j.at("version").get<std::string>();
        m.n_sim = j.at("n_sim").get<int>();
        m.finished = j.at("finished").get<bool>();
        for (const auto& s : j.at("scenarios")) {
            Entry e;
            e.id = s.at("id").get<std::string>();
            e.status = s.at("status").get<std::string>();
            if (!s.at("wall_clock_seconds").is_null()) e.wall_clock_seconds = s["wall_clock_seconds"].get<double>();
            m.scenarios.push_back(e);
        }
        return m;
    }

    Entry* find(const std::string& id)
    {
        for (auto& e : scenarios)
            if (e.id == id) return &e;
        return nullptr;
    }

    void save(const fs::path& path) const { write_atomic(path, to_json().dump(2) + "\n"); }
};

inline fs::path part_path(const fs::path& out_dir, const std::string& id)
{
    return out_dir / "parts" / (id + ".csv");
}

inline fs::path part_runtime_path(const fs::path& out_dir, const std::string& id)
{
    return out_dir / "parts" / (id + ".runtimes.csv");
}

struct SimulationRunOptions
{
    int threads = 1;
    bool inline_timings = false;
    std::ostream* log = nullptr;
};

/// Runs the replicates of one scenario on `threads` workers and returns the
/// rows sorted into their canonical order.
inline IterationOutput run_scenario(const SimulationConfig& cfg, const ScenarioEntry& entry, SubmodelTruthCache& truth,
                                    const FixedLambdas& fixed, int threads, bool inline_timings)
{
    IterationContext ctx{cfg, entry, truth, fixed, inline_timings};
    std::vector<IterationOutput> results(static_cast<size_t>(cfg.n_sim));
    std::atomic<int> next{0};
    std::mutex err_mutex;
    std::exception_ptr error;
    const auto worker = [&] {
        for (;;) {
            const int it = next.fetch_add(1);
            if (it >= cfg.n_sim) return;
            try {
                results[static_cast<size_t>(it)] = run_iteration(ctx, it);
            } catch (...) {
                std::lock_guard lock(err_mutex);
                if (!error) error = std::current_exception();
                next.store(cfg.n_sim);
            }
        }
    };
    const int nt = std::max(1, std::min(threads, cfg.n_sim));
    std::vector<std::thread> pool;
    for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);

    IterationOutput all;
    for (auto& r : results) {
        all.records.insert(all.records.end(), std::make_move_iterator(r.records.begin()),
                           std::make_move_iterator(r.records.end()));
        all.runtimes.insert(all.runtimes.end(), r.runtimes.begin(), r.runtimes.end());
    }
    std::sort(all.records.begin(), all.records.end(), record_less);
    std::sort(all.runtimes.begin(), all.runtimes.end(),
              [](const RuntimeRecord& a, const RuntimeRecord& b) { return a.tie() < b.tie(); });
    return all;
}

inline std::string serialize_runtimes(const std::vector<RuntimeRecord>& rows, bool header)
{
    std::ostringstream os;
    if (header) os << join_row(runtime_header()) << '\n';
    for (const auto& r : rows)
        os << join_row({r.scenario_id, std::to_string(r.iteration), r.flavor, r.method, r.tuning,
                        format_number(r.seconds)})
           << '\n';
    return os.str();
}

inline FixedLambdas fixed_lambdas_for(const SimulationConfig& cfg, const ScenarioEntry& entry)
{
    FixedLambdas out;
    const bool needed = std::any_of(cfg.tuning_rules.begin(), cfg.tuning_rules.end(),
                                    [](const TuningRule& r) { return r.kind == TuningRule::Kind::fixed; });
    if (!needed || !cfg.any_lasso_method()) return out;
    for (LassoFlavor f : cfg.flavors) {
        if (cfg.options.fixed_lambda) {
            out[f] = *cfg.options.fixed_lambda;
        } else {
            out[f] = calibrate_fixed_lambda(entry.scenario, f, std::max(cfg.options.fix_n_pop, entry.scenario.n),
                                            cfg.options.fix_n_rep, cfg.seed, cfg.selection_options())
                         .lambda;
        }
    }
    return out;
}

/// Executes (or resumes) the grid into `out_dir`: parts/<scenario>.csv per
/// scenario, then long.csv, summary.csv and runtimes.csv merged from parts.
inline void run_simulation(const SimulationConfig& cfg, const fs::path& out_dir, const SimulationRunOptions& ropt = {})
{
    fs::create_directories(out_dir / "parts");
    const fs::path manifest_path = out_dir / "manifest.json";
    const std::string hash = config_hash(cfg);
    Manifest manifest;
    if (fs::exists(manifest_path)) {
        std::ifstream in(manifest_path);
        json j;
        in >> j;
        manifest = Manifest::from_json(j);
        if (manifest.config_hash != hash)
            throw Error("output directory holds results of a different configuration (hash " + manifest.config_hash +
                        ", current " + hash + ")");
    } else {
        manifest.config_hash = hash;
        manifest.seed = cfg.seed;
        manifest.n_sim = cfg.n_sim;
    }
    for (const auto& e : cfg.scenarios)
        if (!manifest.find(e.scenario.id)) manifest.scenarios.push_back({e.scenario.id});
    manifest.save(manifest_path);

    SubmodelTruthCache truth(cfg.options.n_pop_truth);
    for (size_t k = 0; k < cfg.scenarios.size(); ++k) {
        const auto& entry = cfg.scenarios[k];
        auto* me = manifest.find(entry.scenario.id);
        if (me->status == "complete" && fs::exists(part_path(out_dir, entry.scenario.id)) &&
            fs::exists(part_runtime_path(out_dir, entry.scenario.id)))
            continue;
        if (ropt.log)
            *ropt.log << "[" << (k + 1) << "/" << cfg.scenarios.size() << "] " << entry.scenario.id << std::endl;
        detail::Stopwatch sw;
        const auto fixed = fixed_lambdas_for(cfg, entry);
        const auto res = run_scenario(cfg, entry, truth, fixed, ropt.threads, ropt.inline_timings);
        truth.release_population(entry.scenario.id);

        std::ostringstream os;
        write_long(os, res.records);
        write_atomic(part_runtime_path(out_dir, entry.scenario.id), serialize_runtimes(res.runtimes, true));
        write_atomic(part_path(out_dir, entry.scenario.id), os.str());
        me->status = "complete";
        me->wall_clock_seconds = sw.seconds();
        manifest.save(manifest_path);
    }

    // Merge from the persisted parts so fresh and resumed runs agree byte for byte.
    std::vector<IntervalRecord> records;
    std::string runtimes = join_row(runtime_header()) + "\n";
    std::vector<std::string> ids;
    for (const auto& e : cfg.scenarios) ids.push_back(e.scenario.id);
    std::sort(ids.begin(), ids.end());
    for (const auto& id : ids) {
        auto part = read_long_file(part_path(out_dir, id).string());
        records.insert(records.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
        std::ifstream rin(part_runtime_path(out_dir, id), std::ios::binary);
        std::string line;
        std::getline(rin, line);
        while (std::getline(rin, line))
            if (!line.empty()) runtimes += line + "\n";
    }
    std::stable_sort(records.begin(), records.end(), record_less);
    std::ostringstream long_os, summary_os;
    write_long(long_os, records);
    write_summary(summary_os, summarize(records));
    write_atomic(out_dir / "long.csv", long_os.str());
    write_atomic(out_dir / "summary.csv", summary_os.str());
    write_atomic(out_dir / "runtimes.csv", runtimes);
    manifest.finished = true;
    manifest.save(manifest_path);
}

} // namespace coxsel::harness
