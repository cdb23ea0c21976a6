#pragma once

// Performance measures: selective coverage, interval width, selective power
// and type I error, selection quality, and the predictive IBS / C-index.

#include "coxsel/common.hpp"
#include "coxsel/datagen.hpp"
#include "coxsel/survival_core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <tuple>
#include <vector>

namespace coxsel {

// ---------------------------------------------------------------------------
// Kaplan-Meier censoring survivor, IBS, C-index
// ---------------------------------------------------------------------------

/// Right-continuous step function G(t) = P(C > t) from the KM estimator with
/// censoring treated as the event.
struct CensoringSurvivor
{
    std::vector<double> times; // jump times (censoring times)
    std::vector<double> surv;  // G right after each jump

    double at(double t) const
    {
        const auto it = std::upper_bound(times.begin(), times.end(), t);
        if (it == times.begin()) return 1.0;
        return surv[static_cast<size_t>(it - times.begin()) - 1];
    }

    /// Left limit G(t-).
    double before(double t) const
    {
        const auto it = std::lower_bound(times.begin(), times.end(), t);
        if (it == times.begin()) return 1.0;
        return surv[static_cast<size_t>(it - times.begin()) - 1];
    }
};

inline CensoringSurvivor km_censoring_survivor(const SurvivalDataset& data)
{
    CensoringSurvivor g;
    const auto& order = data.order();
    double s = 1.0;
    const auto n = static_cast<int>(order.size());
    for (int k = 0; k < n; ++k) {
        const int i = order[static_cast<size_t>(k)];
        if (data.status()[i] == 1) continue;
        const int at_risk = n - k;
        s *= 1.0 - 1.0 / at_risk;
        g.times.push_back(data.time()[i]);
        g.surv.push_back(s);
    }
    return g;
}

struct IbsResult
{
    double ibs = kNaN;
    double tau = kNaN;
    bool truncated = false;
};

/// Brier score at t with IPCW weights.
inline double brier_score(const SurvivalDataset& test, const std::function<double(int, double)>& surv,
                          const CensoringSurvivor& g, double t)
{
    double sum = 0.0;
    for (int i = 0; i < test.n(); ++i) {
        const double y = test.time()[i];
        const double s = surv(i, t);
        if (y <= t && test.status()[i] == 1) {
            const double w = g.before(y);
            if (w > 0.0) sum += s * s / w;
        } else if (y > t) {
            const double w = g.at(t);
            if (w > 0.0) sum += (1.0 - s) * (1.0 - s) / w;
        }
    }
    return sum / test.n();
}

/// IBS over [0, tau] by the trapezoid rule on `grid_points` equispaced
/// points, tau the 90th percentile of observed times, truncated to the last
/// time with G > 0.05 when the censoring survivor gets too small.
inline IbsResult integrated_brier(const SurvivalDataset& test, const std::function<double(int, double)>& surv,
                                  const CensoringSurvivor& g, int grid_points = 100)
{
    if (grid_points < 2) throw Error("integrated_brier: need at least 2 grid points");
    IbsResult out;
    const std::vector<double> y(test.time().data(), test.time().data() + test.n());
    double tau = quantile_type7(y, 0.9);
    if (g.at(tau) <= 0.05) {
        // last time with G > 0.05: just before the jump that takes G to <= 0.05
        for (size_t k = 0; k < g.times.size(); ++k) {
            if (g.surv[k] <= 0.05) {
                tau = k == 0 ? 0.0 : std::nextafter(g.times[k], -kInf);
                break;
            }
        }
        out.truncated = true;
    }
    out.tau = tau;
    if (!(tau > 0.0)) return out;
    double integral = 0.0;
    double prev = brier_score(test, surv, g, 0.0);
    const double h = tau / (grid_points - 1);
    for (int k = 1; k < grid_points; ++k) {
        const double t = k == grid_points - 1 ? tau : h * k;
        const double cur = brier_score(test, surv, g, t);
        integral += 0.5 * h * (prev + cur);
        prev = cur;
    }
    out.ibs = integral / tau;
    return out;
}

/// Harrell's C: pairs with delta_i = 1 and Y_i < Y_j; concordant when
/// risk_i > risk_j, risk ties count one half. NaN when no pair is comparable.
inline double harrell_cindex(const SurvivalDataset& test, const Vector& risk)
{
    if (risk.size() != test.n()) throw Error("harrell_cindex: risk length mismatch");
    double conc = 0.0, pairs = 0.0;
    for (int i = 0; i < test.n(); ++i) {
        if (test.status()[i] != 1) continue;
        for (int j = 0; j < test.n(); ++j) {
            if (!(test.time()[i] < test.time()[j])) continue;
            pairs += 1.0;
            if (risk[i] > risk[j])
                conc += 1.0;
            else if (risk[i] == risk[j])
                conc += 0.5;
        }
    }
    return pairs > 0.0 ? conc / pairs : kNaN;
}

// ---------------------------------------------------------------------------
// Per-coefficient records and aggregation
// ---------------------------------------------------------------------------

/// One coefficient of one (scenario, iteration, flavor, method, tuning).
/// Interval fields are NaN when no interval is reported for the coefficient.
struct IntervalRecord
{
    std::string scenario_id;
    int n = 0;
    int p = 0;
    double rho = kNaN;
    double censor_target = kNaN;
    std::string baseline;
    std::string pattern;
    std::string flavor;
    std::string method;
    std::string tuning;
    int iteration = 0;
    int coef_index = 0; // one-based
    bool selected = false;
    bool reported = false;
    double estimate = kNaN;
    double lower = kNaN;
    double upper = kNaN;
    bool degenerate = false;
    std::string target_kind; // "submodel" | "full_model" | "" when not reported
    double target_value = kNaN;
    double beta0 = kNaN;
    int covered = -1;       // -1 = not applicable
    int rejected_zero = -1; // -1 = not applicable
    double runtime_seconds = kNaN;
    int model_size = 0;
    double p_true = kNaN;
    double ibs = kNaN;
    double cindex = kNaN;
    std::string flags; // ';'-separated failure flags of the iteration, empty if none

    bool scorable() const { return reported && !degenerate && std::isfinite(lower) && std::isfinite(upper); }
};

/// Fills covered / rejected_zero from the interval and target.
inline void score_record(IntervalRecord& r)
{
    if (!r.reported || r.degenerate || std::isnan(r.lower) || std::isnan(r.upper)) {
        r.covered = -1;
        r.rejected_zero = -1;
        return;
    }
    r.covered = std::isnan(r.target_value) ? -1 : (r.lower <= r.target_value && r.target_value <= r.upper ? 1 : 0);
    r.rejected_zero = (r.lower <= 0.0 && 0.0 <= r.upper) ? 0 : 1;
}

struct Rate
{
    double value = kNaN;
    double se = kNaN;
    long count = 0;

    static Rate of(long hits, long count)
    {
        Rate r;
        r.count = count;
        if (count > 0) {
            r.value = static_cast<double>(hits) / count;
            r.se = std::sqrt(r.value * (1.0 - r.value) / count);
        }
        return r;
    }
};

struct WidthSummary
{
    double median = kNaN;
    double q25 = kNaN;
    double q75 = kNaN;
    long finite = 0;
    long excluded = 0; // degenerate or infinite
};

struct CellKey
{
    std::string scenario_id;
    std::string flavor;
    std::string method;
    std::string tuning;

    auto tie() const { return std::tie(scenario_id, flavor, method, tuning); }
    bool operator<(const CellKey& o) const { return tie() < o.tie(); }
    bool operator==(const CellKey& o) const { return tie() == o.tie(); }
};

inline CellKey cell_of(const IntervalRecord& r)
{
    return {r.scenario_id, r.flavor, r.method, r.tuning};
}

/// Statistics of a group of records (a coefficient within a cell, a whole
/// cell, or a cross-scenario pool).
struct GroupStats
{
    long iterations = 0;
    long reported = 0;
    long degenerate = 0;
    Rate coverage;
    WidthSummary width;
    Rate power;
    Rate type1;
    double mean_model_size = kNaN;
    double mean_p_true = kNaN;
    long empty_selections = 0;
    double mean_ibs = kNaN;
    double mean_cindex = kNaN;
    double failure_rate = kNaN;
};

inline Rate selective_coverage(const std::vector<const IntervalRecord*>& rows)
{
    long hit = 0, m = 0;
    for (const auto* r : rows) {
        if (!r->reported || r->degenerate || r->covered < 0) continue;
        ++m;
        hit += r->covered;
    }
    return Rate::of(hit, m);
}

inline WidthSummary sci_width(const std::vector<const IntervalRecord*>& rows)
{
    WidthSummary w;
    std::vector<double> widths;
    for (const auto* r : rows) {
        if (!r->reported) continue;
        const double wd = r->upper - r->lower;
        if (r->degenerate || !std::isfinite(wd)) {
            ++w.excluded;
            continue;
        }
        widths.push_back(wd);
    }
    w.finite = static_cast<long>(widths.size());
    if (!widths.empty()) {
        w.median = quantile_type7(widths, 0.5);
        w.q25 = quantile_type7(widths, 0.25);
        w.q75 = quantile_type7(widths, 0.75);
    }
    return w;
}

/// Rejection of H0: beta_j = 0 among reported non-degenerate intervals,
/// split by whether the data-generating coefficient is zero.
inline std::pair<Rate, Rate> selective_power_type1(const std::vector<const IntervalRecord*>& rows)
{
    long pr = 0, pm = 0, tr = 0, tm = 0;
    for (const auto* r : rows) {
        if (!r->reported || r->degenerate || r->rejected_zero < 0 || std::isnan(r->beta0)) continue;
        if (r->beta0 != 0.0) {
            ++pm;
            pr += r->rejected_zero;
        } else {
            ++tm;
            tr += r->rejected_zero;
        }
    }
    return {Rate::of(pr, pm), Rate::of(tr, tm)};
}

/// P_true = |M ∩ active| / |M|; NaN for an empty selection.
inline double p_true(const IndexList& selected, const IndexList& active)
{
    if (selected.empty()) return kNaN;
    long hit = 0;
    for (int j : selected)
        if (std::find(active.begin(), active.end(), j) != active.end()) ++hit;
    return static_cast<double>(hit) / static_cast<double>(selected.size());
}

namespace detail {

inline double mean_defined(const std::vector<double>& v)
{
    double s = 0.0;
    long m = 0;
    for (double x : v)
        if (!std::isnan(x)) {
            s += x;
            ++m;
        }
    return m ? s / m : kNaN;
}

} // namespace detail

/// Aggregates a group; iteration-level quantities (model size, P_true, IBS,
/// C-index, failures) are taken once per (scenario, iteration).
inline GroupStats group_stats(const std::vector<const IntervalRecord*>& rows)
{
    GroupStats g;
    g.coverage = selective_coverage(rows);
    g.width = sci_width(rows);
    std::tie(g.power, g.type1) = selective_power_type1(rows);
    std::map<std::pair<std::string, int>, const IntervalRecord*> per_iter;
    for (const auto* r : rows) {
        per_iter.emplace(std::make_pair(r->scenario_id, r->iteration), r);
        g.reported += r->reported;
        g.degenerate += r->reported && r->degenerate;
    }
    g.iterations = static_cast<long>(per_iter.size());
    std::vector<double> size, pt, ibs, ci;
    long failures = 0;
    for (const auto& [key, r] : per_iter) {
        size.push_back(r->model_size);
        pt.push_back(r->p_true);
        ibs.push_back(r->ibs);
        ci.push_back(r->cindex);
        g.empty_selections += r->model_size == 0;
        failures += !r->flags.empty();
    }
    g.mean_model_size = detail::mean_defined(size);
    g.mean_p_true = detail::mean_defined(pt);
    g.mean_ibs = detail::mean_defined(ibs);
    g.mean_cindex = detail::mean_defined(ci);
    if (g.iterations > 0) g.failure_rate = static_cast<double>(failures) / g.iterations;
    return g;
}

struct SummaryRow
{
    std::string block; // "coef" | "cell" | "all_intervals" | "all_cells"
    CellKey key;
    const IntervalRecord* exemplar = nullptr; // scenario descriptors (null for cross-scenario blocks)
    std::string coef;                         // one-based index or "ALL"
    GroupStats stats;
    bool flagged = false;
    long cells = 0; // number of cells averaged (all_cells block)
};

inline constexpr double kCellFailureThreshold = 0.2;

/// Per-coefficient rows and one pooled row for each cell, followed by two
/// cross-scenario blocks per (flavor, method, tuning): rates pooled over all
/// intervals, and unweighted means of the per-cell rates. Ordering is by
/// sorted keys, so results do not depend on record order.
inline std::vector<SummaryRow> summarize(const std::vector<IntervalRecord>& records)
{
    std::map<CellKey, std::map<int, std::vector<const IntervalRecord*>>> by_cell;
    for (const auto& r : records) by_cell[cell_of(r)][r.coef_index].push_back(&r);

    std::vector<SummaryRow> out;
    std::map<std::tuple<std::string, std::string, std::string>, std::vector<const IntervalRecord*>> pooled;
    std::map<std::tuple<std::string, std::string, std::string>, std::vector<GroupStats>> cell_stats;
    for (const auto& [key, coefs] : by_cell) {
        std::vector<const IntervalRecord*> all;
        for (const auto& [j, rows] : coefs) {
            all.insert(all.end(), rows.begin(), rows.end());
            SummaryRow row;
            row.block = "coef";
            row.key = key;
            row.exemplar = rows.front();
            row.coef = std::to_string(j);
            row.stats = group_stats(rows);
            out.push_back(row);
        }
        std::sort(all.begin(), all.end(), [](const IntervalRecord* a, const IntervalRecord* b) {
            return std::tie(a->iteration, a->coef_index) < std::tie(b->iteration, b->coef_index);
        });
        SummaryRow cell;
        cell.block = "cell";
        cell.key = key;
        cell.exemplar = all.front();
        cell.coef = "ALL";
        cell.stats = group_stats(all);
        cell.flagged = cell.stats.failure_rate > kCellFailureThreshold;
        out.push_back(cell);
        const auto pk = std::make_tuple(key.flavor, key.method, key.tuning);
        auto& pool = pooled[pk];
        pool.insert(pool.end(), all.begin(), all.end());
        cell_stats[pk].push_back(cell.stats);
    }

    for (const auto& [pk, rows] : pooled) {
        SummaryRow row;
        row.block = "all_intervals";
        row.key = {"ALL", std::get<0>(pk), std::get<1>(pk), std::get<2>(pk)};
        row.coef = "ALL";
        row.stats = group_stats(rows);
        row.cells = static_cast<long>(cell_stats[pk].size());
        out.push_back(row);

        // Unweighted mean over cells of each defined cell-level rate.
        SummaryRow avg;
        avg.block = "all_cells";
        avg.key = row.key;
        avg.coef = "ALL";
        avg.cells = row.cells;
        const auto& cs = cell_stats[pk];
        const auto mean_of = [&](auto getter) {
            std::vector<double> v;
            for (const auto& s : cs) v.push_back(getter(s));
            return detail::mean_defined(v);
        };
        auto& st = avg.stats;
        st.iterations = row.stats.iterations;
        st.reported = row.stats.reported;
        st.degenerate = row.stats.degenerate;
        st.coverage.value = mean_of([](const GroupStats& s) { return s.coverage.value; });
        st.coverage.count = row.stats.coverage.count;
        st.width.median = mean_of([](const GroupStats& s) { return s.width.median; });
        st.width.finite = row.stats.width.finite;
        st.width.excluded = row.stats.width.excluded;
        st.power.value = mean_of([](const GroupStats& s) { return s.power.value; });
        st.power.count = row.stats.power.count;
        st.type1.value = mean_of([](const GroupStats& s) { return s.type1.value; });
        st.type1.count = row.stats.type1.count;
        st.mean_model_size = mean_of([](const GroupStats& s) { return s.mean_model_size; });
        st.mean_p_true = mean_of([](const GroupStats& s) { return s.mean_p_true; });
        st.empty_selections = row.stats.empty_selections;
        st.mean_ibs = mean_of([](const GroupStats& s) { return s.mean_ibs; });
        st.mean_cindex = mean_of([](const GroupStats& s) { return s.mean_cindex; });
        st.failure_rate = mean_of([](const GroupStats& s) { return s.failure_rate; });
        out.push_back(avg);
    }
    return out;
}

} // namespace coxsel
