#pragma once

#include "coxsel/harness/config.hpp"
#include "coxsel/harness/csv.hpp"

#include <filesystem>

namespace coxsel::harness {

/// Covariate declaration: `name`, `name:num`, `name:cat` or
/// `name:cat[a|b|c]` (declared levels, the first one is the reference).
struct CovariateSpec
{
    std::string name;
    enum class Type { automatic, numeric, categorical } type = Type::automatic;
    std::vector<std::string> levels;
};

inline std::vector<CovariateSpec> parse_covariate_spec(const std::string& spec)
{
    std::vector<CovariateSpec> out;
    std::string item;
    int depth = 0;
    const auto flush = [&] {
        const auto b = item.find_first_not_of(' ');
        const auto e = item.find_last_not_of(' ');
        item = b == std::string::npos ? "" : item.substr(b, e - b + 1);
        if (item.empty()) throw Error("covariates: empty entry in '" + spec + "'");
        CovariateSpec c;
        const auto colon = item.find(':');
        c.name = item.substr(0, colon);
        if (colon != std::string::npos) {
            std::string t = item.substr(colon + 1);
            const auto br = t.find('[');
            if (br != std::string::npos) {
                if (t.back() != ']') throw Error("covariates: unterminated level list in '" + item + "'");
                std::string lv = t.substr(br + 1, t.size() - br - 2);
                t = t.substr(0, br);
                std::stringstream ss(lv);
                std::string l;
                while (std::getline(ss, l, '|')) c.levels.push_back(l);
                if (c.levels.empty()) throw Error("covariates: empty level list in '" + item + "'");
            }
            if (t == "num") c.type = CovariateSpec::Type::numeric;
            else if (t == "cat") c.type = CovariateSpec::Type::categorical;
            else throw Error("covariates: unknown type '" + t + "' for '" + c.name + "'");
            if (!c.levels.empty() && c.type != CovariateSpec::Type::categorical)
                throw Error("covariates: levels given for non-categorical '" + c.name + "'");
        }
        out.push_back(c);
        item.clear();
    };
    for (char ch : spec) {
        if (ch == '[') ++depth;
        if (ch == ']') --depth;
        if (ch == ',' && depth == 0) flush();
        else item += ch;
    }
    flush();
    return out;
}

struct RealDesign
{
    Vector time;
    IntVector status;
    Matrix x;                       // raw design, dummies included
    std::vector<std::string> names; // design column names
};

namespace detail {

inline bool is_missing(const std::string& s)
{
    return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == ".";
}

inline bool parses_as_number(const std::string& s)
{
    try {
        const double v = parse_number(s);
        return !std::isnan(v) || s == "NaN";
    } catch (const Error&) {
        return false;
    }
}

} // namespace detail

/// Reads time, event and covariates; categorical covariates become 0/1
/// dummies for every level except the reference. `spec` = "all" uses every
/// other column with automatic typing.
inline RealDesign read_real_design(const CsvTable& t, const std::string& time_col, const std::string& event_col,
                                   const std::string& spec)
{
    std::vector<CovariateSpec> covs;
    if (spec == "all" || spec.empty()) {
        for (const auto& h : t.header)
            if (h != time_col && h != event_col) covs.push_back({h, CovariateSpec::Type::automatic, {}});
    } else {
        covs = parse_covariate_spec(spec);
    }
    if (covs.empty()) throw Error("no covariates selected");
    const int tc = t.require_column(time_col);
    const int ec = t.require_column(event_col);
    const auto n = static_cast<Eigen::Index>(t.rows.size());
    if (n < 2) throw Error("data: need at least 2 rows");

    const auto where = [&](size_t row, const std::string& col) {
        return "row " + std::to_string(row + 2) + ", column '" + col + "'";
    };

    RealDesign d;
    d.time.resize(n);
    d.status.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = t.rows[static_cast<size_t>(i)];
        const auto& ts = row[static_cast<size_t>(tc)];
        double tv;
        try {
            tv = parse_number(ts);
        } catch (const Error&) {
            throw Error(where(static_cast<size_t>(i), time_col) + ": time '" + ts + "' is not a number");
        }
        if (!(tv > 0.0) || !std::isfinite(tv))
            throw Error(where(static_cast<size_t>(i), time_col) + ": time must be positive and finite, got '" + ts + "'");
        d.time[i] = tv;
        const auto& es = row[static_cast<size_t>(ec)];
        if (es == "1" || es == "TRUE" || es == "true") d.status[i] = 1;
        else if (es == "0" || es == "FALSE" || es == "false") d.status[i] = 0;
        else throw Error(where(static_cast<size_t>(i), event_col) + ": event must be 0 or 1, got '" + es + "'");
    }

    std::vector<Vector> columns;
    for (auto c : covs) {
        const int col = t.require_column(c.name);
        if (col == tc || col == ec) throw Error("covariate '" + c.name + "' is the time or event column");
        std::vector<std::string> cells;
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& v = t.rows[static_cast<size_t>(i)][static_cast<size_t>(col)];
            if (detail::is_missing(v)) throw Error(where(static_cast<size_t>(i), c.name) + ": missing value");
            cells.push_back(v);
        }
        if (c.type == CovariateSpec::Type::automatic)
            c.type = std::all_of(cells.begin(), cells.end(), detail::parses_as_number)
                         ? CovariateSpec::Type::numeric
                         : CovariateSpec::Type::categorical;
        if (c.type == CovariateSpec::Type::numeric) {
            Vector v(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                try {
                    v[i] = parse_number(cells[static_cast<size_t>(i)]);
                } catch (const Error&) {
                    throw Error(where(static_cast<size_t>(i), c.name) + ": '" + cells[static_cast<size_t>(i)] +
                                "' is not a number");
                }
                if (!std::isfinite(v[i])) throw Error(where(static_cast<size_t>(i), c.name) + ": non-finite value");
            }
            columns.push_back(v);
            d.names.push_back(c.name);
            continue;
        }
        std::vector<std::string> levels = c.levels;
        if (levels.empty()) {
            levels = cells;
            std::sort(levels.begin(), levels.end());
            levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
        }
        for (Eigen::Index i = 0; i < n; ++i)
            if (std::find(levels.begin(), levels.end(), cells[static_cast<size_t>(i)]) == levels.end())
                throw Error(where(static_cast<size_t>(i), c.name) + ": unknown category '" +
                            cells[static_cast<size_t>(i)] + "'");
        for (size_t l = 1; l < levels.size(); ++l) {
            Vector v(n);
            for (Eigen::Index i = 0; i < n; ++i) v[i] = cells[static_cast<size_t>(i)] == levels[l] ? 1.0 : 0.0;
            columns.push_back(v);
            d.names.push_back(c.name + "=" + levels[l]);
        }
    }
    d.x.resize(n, static_cast<Eigen::Index>(columns.size()));
    for (size_t j = 0; j < columns.size(); ++j) d.x.col(static_cast<Eigen::Index>(j)) = columns[j];
    return d;
}

struct RealAnalysisOptions
{
    int subsamples = 100;
    double fraction = 0.8;
    std::vector<Method> methods{Method::refit, Method::split, Method::debiased, Method::exact_psi};
    TuningRule rule;
    LassoFlavor flavor = LassoFlavor::standard;
    double alpha = 0.1;
    std::uint64_t seed = 1;
    double rare_threshold = 0.01;
    SelectionOptions selection;
};

struct RealInterval
{
    int subsample = 0;
    std::string method;
    int coef_index = 0; // zero-based in the cleaned design
    bool selected = false;
    double estimate = kNaN;
    double lower = kNaN;
    double upper = kNaN;
    bool degenerate = false;
};

struct RealAnalysis
{
    std::vector<std::string> names; // cleaned design columns
    Vector full_effect;             // standardized full-data coefficients
    IndexList display_order;        // by increasing |full_effect|
    std::vector<int> selected_count;
    int subsamples = 0;
    std::vector<RealInterval> intervals;
    std::vector<std::string> flags; // per subsample
    SurvivalDataset data;           // cleaned, standardized, jittered

    double frequency(int j) const { return static_cast<double>(selected_count[static_cast<size_t>(j)]) / subsamples; }
};

/// Cleaned, standardized dataset; tied times are broken with the simulation
/// jitter rule.
inline std::pair<SurvivalDataset, std::vector<std::string>> prepare_real_dataset(const RealDesign& d,
                                                                                  double rare_threshold)
{
    auto cleaned = clean_design(d.x, d.names, rare_threshold);
    Vector y = jitter_observed(d.time, d.status);
    return {SurvivalDataset(std::move(y), d.status, std::move(cleaned.x)), cleaned.names};
}

/// Draws rows without replacement; fraction 1 returns every row.
inline std::vector<int> draw_subsample(int n, double fraction, Rng& rng)
{
    const int m = static_cast<int>(std::lround(fraction * n));
    if (m < 2) throw Error("subsample: fraction leaves fewer than 2 rows");
    auto perm = random_permutation(n, rng);
    perm.resize(static_cast<size_t>(m));
    std::sort(perm.begin(), perm.end());
    return perm;
}

inline RealAnalysis analyze_real(const RealDesign& design, const RealAnalysisOptions& opt)
{
    if (!(opt.fraction > 0.0 && opt.fraction <= 1.0)) throw Error("fraction must lie in (0,1]");
    if (opt.subsamples < 1) throw Error("subsamples must be positive");
    for (Method m : opt.methods)
        if (m == Method::oracle) throw Error("the oracle method needs a known truth and is not available on real data");
    auto [data, names] = prepare_real_dataset(design, opt.rare_threshold);
    RealAnalysis out{names, {}, {}, std::vector<int>(names.size(), 0), opt.subsamples, {}, {}, data};
    const int p = data.p();

    // Display order by the full-data unpenalized fit (ridge when it is not estimable).
    const auto mle = fit_cox_mle(data);
    out.full_effect = (mle.converged && !mle.separation && !mle.rank_deficient) ? mle.beta : fit_cox_ridge(data, 1e-3);
    out.display_order = all_indices(p);
    std::stable_sort(out.display_order.begin(), out.display_order.end(), [&](int a, int b) {
        return std::abs(out.full_effect[a]) < std::abs(out.full_effect[b]);
    });

    for (int s = 0; s < opt.subsamples; ++s) {
        Rng rng(derive_seed(opt.seed, "subsample", static_cast<std::uint64_t>(s)));
        const auto rows = draw_subsample(data.n(), opt.fraction, rng);
        const auto sub = data.rows(rows).standardized();
        const auto& st = sub.standardization();
        std::string flags;
        const auto add_flag = [&](const std::string& f) {
            if (f.empty() || flags.find(f) != std::string::npos) return;
            flags += (flags.empty() ? "" : ";") + f;
        };

        std::optional<SelectionResult> sel;
        Rng srng(derive_seed(opt.seed, "select", static_cast<std::uint64_t>(s)));
        try {
            sel = select_model(sub, opt.flavor, opt.rule, srng, opt.selection);
            for (int j : sel->fit.active) ++out.selected_count[static_cast<size_t>(j)];
        } catch (const Error&) {
            add_flag("selection_failed");
        }

        for (Method m : opt.methods) {
            InferenceResult res;
            IndexList selected;
            if (m == Method::full) {
                res = infer_full(sub, opt.alpha);
                selected = all_indices(p);
            } else if (m == Method::split) {
                Rng sprng(derive_seed(opt.seed, "split", static_cast<std::uint64_t>(s)));
                SplitSelection spec{opt.flavor, opt.rule, opt.selection};
                spec.rule.fixed_lambda = opt.rule.fixed_lambda * 0.5;
                std::optional<SelectionEvent> ev;
                res = infer_split(sub, spec, opt.alpha, sprng, &ev);
                if (ev) selected = ev->active;
            } else {
                if (!sel) continue;
                const auto& fit = sel->fit;
                selected = fit.active;
                switch (m) {
                case Method::refit: res = infer_refit(sub, SelectionEvent::from(fit, sel->weights), opt.alpha); break;
                case Method::refit0: res = infer_refit0(sub, fit, opt.alpha); break;
                case Method::exact_psi: res = infer_exact_psi(sub, fit, sel->weights, opt.alpha); break;
                case Method::debiased: {
                    const auto nw = estimate_nodewise_inverse(sub, fit.beta);
                    res = infer_debiased(sub, fit, nw, opt.alpha);
                    break;
                }
                default: break;
                }
            }
            to_original_scale(res, st);
            if (res.separation) add_flag("separation");
            if (res.not_converged) add_flag("not_converged");
            if (res.split_no_events) add_flag("split_no_events");
            if (res.singular) add_flag("singular");
            for (const auto& iv : res.intervals) {
                const bool is_sel = std::find(selected.begin(), selected.end(), iv.coef_index) != selected.end();
                if (m == Method::debiased && !is_sel) continue;
                out.intervals.push_back(
                    {s, method_name(m), iv.coef_index, is_sel, iv.estimate, iv.lower, iv.upper, iv.degenerate});
            }
        }
        out.flags.push_back(flags);
    }
    return out;
}

inline void write_real_outputs(const RealAnalysis& a, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir / "frequencies.csv", std::ios::binary);
        f << join_row({"rank", "covariate", "coef_index", "standardized_effect", "selected_count", "subsamples",
                       "frequency_percent"})
          << '\n';
        int rank = 1;
        for (int j : a.display_order)
            f << join_row({std::to_string(rank++), a.names[static_cast<size_t>(j)], std::to_string(j + 1),
                           format_number(a.full_effect[j]), std::to_string(a.selected_count[static_cast<size_t>(j)]),
                           std::to_string(a.subsamples), format_number(100.0 * a.frequency(j))})
              << '\n';
    }
    {
        std::vector<int> rank_of(a.names.size());
        for (size_t r = 0; r < a.display_order.size(); ++r) rank_of[static_cast<size_t>(a.display_order[r])] = static_cast<int>(r);
        auto rows = a.intervals;
        std::stable_sort(rows.begin(), rows.end(), [&](const RealInterval& x, const RealInterval& y) {
            return std::make_tuple(x.subsample, x.method, rank_of[static_cast<size_t>(x.coef_index)]) <
                   std::make_tuple(y.subsample, y.method, rank_of[static_cast<size_t>(y.coef_index)]);
        });
        std::ofstream f(dir / "intervals.csv", std::ios::binary);
        f << join_row({"subsample", "method", "covariate", "coef_index", "selected", "estimate", "lower", "upper",
                       "degenerate", "flags"})
          << '\n';
        for (const auto& r : rows)
            f << join_row({std::to_string(r.subsample), r.method, a.names[static_cast<size_t>(r.coef_index)],
                           std::to_string(r.coef_index + 1), r.selected ? "1" : "0", format_number(r.estimate),
                           format_number(r.lower), format_number(r.upper), r.degenerate ? "1" : "0",
                           a.flags[static_cast<size_t>(r.subsample)]})
              << '\n';
    }
}

} // namespace coxsel::harness
