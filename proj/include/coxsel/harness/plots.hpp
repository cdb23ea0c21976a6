#pragma once

#include "coxsel/harness/csv.hpp"

#include <filesystem>
#include <map>
#include <set>

namespace coxsel::harness {

namespace svg {

inline std::string esc(const std::string& s)
{
    std::string o;
    for (char c : s) {
        switch (c) {
        case '&': o += "&amp;"; break;
        case '<': o += "&lt;"; break;
        case '>': o += "&gt;"; break;
        case '"': o += "&quot;"; break;
        default: o += c;
        }
    }
    return o;
}

inline std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline const char* color(size_t k)
{
    static const char* palette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e",
                                    "#e6ab02", "#a6761d", "#666666", "#1f78b4", "#b2df8a"};
    return palette[k % 10];
}

/// Plot area inside a fixed canvas with a legend strip on the right.
struct Canvas
{
    double width = 760, height = 420;
    double left = 70, right = 560, top = 40, bottom = 360;
    std::ostringstream body;

    void text(double x, double y, const std::string& s, const char* anchor = "middle", int size = 12,
              const std::string& extra = "")
    {
        body << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << size << "\" text-anchor=\""
             << anchor << "\"" << extra << ">" << esc(s) << "</text>\n";
    }

    void line(double x1, double y1, double x2, double y2, const std::string& stroke, double w = 1,
              const std::string& extra = "")
    {
        body << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\"" << num(y2)
             << "\" stroke=\"" << stroke << "\" stroke-width=\"" << num(w) << "\"" << extra << "/>\n";
    }

    void circle(double x, double y, double r, const std::string& fill)
    {
        body << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"" << num(r) << "\" fill=\"" << fill
             << "\"/>\n";
    }

    void rect(double x, double y, double w, double h, const std::string& fill)
    {
        body << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
             << "\" fill=\"" << fill << "\"/>\n";
    }

    void frame(const std::string& title, const std::string& xlab, const std::string& ylab)
    {
        line(left, bottom, right, bottom, "#000");
        line(left, top, left, bottom, "#000");
        text((left + right) / 2, 22, title, "middle", 14);
        text((left + right) / 2, bottom + 40, xlab);
        text(18, (top + bottom) / 2, ylab, "middle", 12,
             " transform=\"rotate(-90 18 " + num((top + bottom) / 2) + ")\"");
    }

    void legend(const std::vector<std::string>& labels)
    {
        for (size_t k = 0; k < labels.size(); ++k) {
            const double y = top + 10 + 18.0 * static_cast<double>(k);
            rect(right + 20, y - 9, 12, 12, color(k));
            text(right + 38, y + 1, labels[k], "start", 11);
        }
    }

    std::string str() const
    {
        std::ostringstream o;
        o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
          << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
          << "\" viewBox=\"0 0 " << num(width) << " " << num(height) << "\" font-family=\"sans-serif\">\n"
          << "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n"
          << body.str() << "</svg>\n";
        return o.str();
    }
};

/// Maps [lo, hi] onto pixel range [a, b], optionally on log10 scale.
struct Axis
{
    double lo = 0, hi = 1, a = 0, b = 1;
    bool log = false;

    double operator()(double v) const
    {
        const double t = log ? (std::log10(v) - std::log10(lo)) / (std::log10(hi) - std::log10(lo))
                             : (v - lo) / (hi - lo);
        return a + t * (b - a);
    }

    std::vector<double> ticks() const
    {
        std::vector<double> t;
        if (log) {
            for (double e = std::floor(std::log10(lo)); e <= std::ceil(std::log10(hi)); ++e)
                for (double m : {1.0, 2.0, 5.0}) {
                    const double v = m * std::pow(10.0, e);
                    if (v >= lo * (1 - 1e-12) && v <= hi * (1 + 1e-12)) t.push_back(v);
                }
            return t;
        }
        const double span = hi - lo;
        const double raw = span / 5;
        const double mag = std::pow(10.0, std::floor(std::log10(raw)));
        double step = mag;
        for (double m : {1.0, 2.0, 5.0, 10.0})
            if (m * mag >= raw) {
                step = m * mag;
                break;
            }
        for (double v = std::ceil(lo / step - 1e-9) * step; v <= hi + 1e-9 * step; v += step)
            t.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
        return t;
    }
};

inline std::string tick_label(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

} // namespace svg

struct PlotFiles
{
    std::vector<std::filesystem::path> written;
    std::vector<std::string> warnings;
};

namespace detail {

struct SummaryView
{
    const CsvTable& t;
    int c_block, c_n, c_flavor, c_method, c_tuning, c_scen;

    explicit SummaryView(const CsvTable& table)
        : t(table), c_block(t.require_column("block")), c_n(t.require_column("n")),
          c_flavor(t.require_column("lasso_flavor")), c_method(t.require_column("method")),
          c_tuning(t.require_column("tuning")), c_scen(t.require_column("scenario_id"))
    {
    }

    std::string series(const std::vector<std::string>& row) const
    {
        const auto& f = row[static_cast<size_t>(c_flavor)];
        const auto& tu = row[static_cast<size_t>(c_tuning)];
        std::string s = row[static_cast<size_t>(c_method)];
        if (f != "none") s += " / " + f;
        if (tu != "none") s += " / " + tu;
        return s;
    }

    double value(const std::vector<std::string>& row, const std::string& col) const
    {
        try {
            return parse_number(row[static_cast<size_t>(t.require_column(col))]);
        } catch (const Error&) {
            return kNaN;
        }
    }
};

} // namespace detail

/// Coverage against n, widths on a log scale, and pooled power / type I
/// error bars, drawn straight from the summary rows.
inline PlotFiles emit_plots(const CsvTable& summary, const std::filesystem::path& out_dir, double nominal = 0.9)
{
    PlotFiles res;
    if (summary.rows.empty()) {
        res.warnings.push_back("summary is empty; no plots written");
        return res;
    }
    detail::SummaryView v(summary);
    std::filesystem::create_directories(out_dir);
    const auto save = [&](const std::string& name, const svg::Canvas& c) {
        const auto path = out_dir / name;
        std::ofstream f(path, std::ios::binary);
        f << c.str();
        res.written.push_back(path);
    };

    std::vector<const std::vector<std::string>*> cells, pooled;
    std::set<std::string> series_set;
    for (const auto& row : summary.rows) {
        const auto& b = row[static_cast<size_t>(v.c_block)];
        if (b == "cell") {
            cells.push_back(&row);
            series_set.insert(v.series(row));
        } else if (b == "all_cells") {
            pooled.push_back(&row);
            series_set.insert(v.series(row));
        }
    }
    const std::vector<std::string> series(series_set.begin(), series_set.end());
    const auto series_index = [&](const std::string& s) {
        return static_cast<size_t>(std::find(series.begin(), series.end(), s) - series.begin());
    };

    // Coverage versus n.
    {
        svg::Canvas c;
        c.frame("Selective coverage", "n", "coverage");
        double nlo = kInf, nhi = -kInf;
        for (const auto* r : cells) {
            const double n = v.value(*r, "n");
            if (std::isfinite(n)) {
                nlo = std::min(nlo, n);
                nhi = std::max(nhi, n);
            }
        }
        if (!std::isfinite(nlo)) {
            nlo = 0;
            nhi = 1;
        }
        if (nhi == nlo) {
            nlo -= 50;
            nhi += 50;
        }
        const double pad = 0.05 * (nhi - nlo);
        svg::Axis x{nlo - pad, nhi + pad, c.left, c.right};
        svg::Axis y{0, 1, c.bottom, c.top};
        for (double t : x.ticks()) {
            c.line(x(t), c.bottom, x(t), c.bottom + 5, "#000");
            c.text(x(t), c.bottom + 18, svg::tick_label(t));
        }
        for (double t : y.ticks()) {
            c.line(c.left - 5, y(t), c.left, y(t), "#000");
            c.text(c.left - 8, y(t) + 4, svg::tick_label(t), "end");
        }
        c.line(c.left, y(nominal), c.right, y(nominal), "#888", 1, " stroke-dasharray=\"4 3\"");
        for (const auto* r : cells) {
            const double n = v.value(*r, "n"), cov = v.value(*r, "coverage");
            if (!std::isfinite(n) || !std::isfinite(cov)) continue;
            c.circle(x(n), y(cov), 3.5, svg::color(series_index(v.series(*r))));
        }
        c.legend(series);
        save("coverage.svg", c);
    }

    // Width distributions on a log scale: median with interquartile bar per cell.
    {
        svg::Canvas c;
        c.frame("Interval width (log scale)", "method", "width");
        double lo = kInf, hi = -kInf;
        for (const auto* r : cells)
            for (const char* col : {"width_q25", "width_median", "width_q75"}) {
                const double w = v.value(*r, col);
                if (std::isfinite(w) && w > 0) {
                    lo = std::min(lo, w);
                    hi = std::max(hi, w);
                }
            }
        if (!std::isfinite(lo)) {
            lo = 0.1;
            hi = 1;
        }
        lo = std::pow(10.0, std::floor(std::log10(lo)));
        hi = std::pow(10.0, std::ceil(std::log10(hi)));
        if (hi <= lo) hi = lo * 10;
        svg::Axis y{lo, hi, c.bottom, c.top, true};
        for (double t : y.ticks()) {
            c.line(c.left - 5, y(t), c.left, y(t), "#000");
            c.text(c.left - 8, y(t) + 4, svg::tick_label(t), "end");
        }
        const double slot = (c.right - c.left) / std::max<size_t>(series.size(), 1);
        std::map<size_t, int> seen;
        std::map<size_t, int> total;
        for (const auto* r : cells) ++total[series_index(v.series(*r))];
        for (const auto* r : cells) {
            const size_t k = series_index(v.series(*r));
            const double med = v.value(*r, "width_median");
            if (!std::isfinite(med) || med <= 0) continue;
            const int idx = seen[k]++;
            const double x = c.left + slot * (static_cast<double>(k) + (idx + 1.0) / (total[k] + 1.0));
            const double q25 = v.value(*r, "width_q25"), q75 = v.value(*r, "width_q75");
            if (std::isfinite(q25) && std::isfinite(q75) && q25 > 0 && q75 > 0)
                c.line(x, y(q25), x, y(q75), svg::color(k), 1.5);
            c.circle(x, y(med), 3, svg::color(k));
        }
        c.legend(series);
        save("widths.svg", c);
    }

    // Pooled power and type I error per method cell.
    {
        svg::Canvas c;
        c.frame("Selective power and type I error (mean over cells)", "method", "rate");
        svg::Axis y{0, 1, c.bottom, c.top};
        for (double t : y.ticks()) {
            c.line(c.left - 5, y(t), c.left, y(t), "#000");
            c.text(c.left - 8, y(t) + 4, svg::tick_label(t), "end");
        }
        const double slot = (c.right - c.left) / std::max<size_t>(pooled.size(), 1);
        for (size_t k = 0; k < pooled.size(); ++k) {
            const auto& r = *pooled[k];
            const double x0 = c.left + slot * static_cast<double>(k);
            const double bw = slot * 0.35;
            const auto col = svg::color(series_index(v.series(r)));
            const double pw = v.value(r, "power"), t1 = v.value(r, "type1");
            if (std::isfinite(pw)) c.rect(x0 + slot * 0.1, y(pw), bw, c.bottom - y(pw), col);
            if (std::isfinite(t1)) c.rect(x0 + slot * 0.1 + bw, y(t1), bw, c.bottom - y(t1), "#bbbbbb");
        }
        c.legend(series);
        c.rect(c.right + 20, c.bottom - 21, 12, 12, "#bbbbbb");
        c.text(c.right + 38, c.bottom - 11, "type I error (grey)", "start", 11);
        save("power_type1.svg", c);
    }
    return res;
}

} // namespace coxsel::harness
