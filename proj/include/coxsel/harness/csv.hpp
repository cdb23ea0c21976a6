#pragma once

#include "coxsel/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

namespace coxsel::harness {

/// %.10g, with NA for NaN and Inf / -Inf for infinities.
inline std::string format_number(double v)
{
    if (std::isnan(v)) return "NA";
    if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline double parse_number(const std::string& s)
{
    if (s == "NA" || s.empty()) return kNaN;
    if (s == "Inf") return kInf;
    if (s == "-Inf") return -kInf;
    size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw Error("not a number: '" + s + "'");
    }
    if (used != s.size()) throw Error("not a number: '" + s + "'");
    return v;
}

inline std::string format_flag(int v)
{
    return v < 0 ? "NA" : std::to_string(v);
}

inline int parse_flag(const std::string& s)
{
    if (s == "NA") return -1;
    if (s == "0") return 0;
    if (s == "1") return 1;
    throw Error("expected 0, 1 or NA, got '" + s + "'");
}

inline int parse_int(const std::string& s)
{
    size_t used = 0;
    int v = 0;
    try {
        v = std::stoi(s, &used);
    } catch (const std::exception&) {
        throw Error("not an integer: '" + s + "'");
    }
    if (used != s.size()) throw Error("not an integer: '" + s + "'");
    return v;
}

inline std::string quote_field(const std::string& s)
{
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string join_row(const std::vector<std::string>& fields)
{
    std::string line;
    for (size_t k = 0; k < fields.size(); ++k) {
        if (k) line += ',';
        line += quote_field(fields[k]);
    }
    return line;
}

/// Reads one CSV record (RFC 4180 quoting, fields may span lines). Returns
/// false at end of input.
inline bool read_row(std::istream& in, std::vector<std::string>& fields)
{
    fields.clear();
    std::string field;
    bool quoted = false, any = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            break;
        } else if (c != '\r') {
            field += c;
        }
    }
    if (!any) return false;
    if (quoted) throw Error("CSV: unterminated quoted field");
    fields.push_back(std::move(field));
    return true;
}

/// Whole table with a header row.
struct CsvTable
{
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const
    {
        for (size_t k = 0; k < header.size(); ++k)
            if (header[k] == name) return static_cast<int>(k);
        return -1;
    }

    int require_column(const std::string& name) const
    {
        const int c = column(name);
        if (c < 0) throw Error("CSV: missing column '" + name + "'");
        return c;
    }
};

inline CsvTable read_csv(std::istream& in)
{
    CsvTable t;
    if (!read_row(in, t.header)) throw Error("CSV: empty input");
    std::vector<std::string> row;
    size_t line = 1;
    while (read_row(in, row)) {
        ++line;
        if (row.size() == 1 && row[0].empty()) continue;
        if (row.size() != t.header.size())
            throw Error("CSV: row " + std::to_string(line) + " has " + std::to_string(row.size()) + " fields, expected " +
                        std::to_string(t.header.size()));
        t.rows.push_back(row);
    }
    return t;
}

inline CsvTable read_csv_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    return read_csv(in);
}

// ---------------------------------------------------------------------------
// Long-format interval table
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& long_header()
{
    static const std::vector<std::string> h{
        "scenario_id", "n",           "p",         "rho",           "censor_target", "baseline",      "pattern",
        "lasso_flavor", "method",     "tuning",    "iteration",     "coef_index",    "selected",      "estimate",
        "lower",       "upper",       "degenerate", "target_kind",  "target_value",  "beta0",         "covered",
        "rejected_zero", "runtime_seconds", "model_size", "p_true", "ibs",           "cindex",        "flags"};
    return h;
}

/// Rows with no reported interval leave estimate..target_value as NA and
/// degenerate empty.
inline std::vector<std::string> to_fields(const IntervalRecord& r)
{
    return {r.scenario_id,
            std::to_string(r.n),
            std::to_string(r.p),
            format_number(r.rho),
            format_number(r.censor_target),
            r.baseline,
            r.pattern,
            r.flavor,
            r.method,
            r.tuning,
            std::to_string(r.iteration),
            std::to_string(r.coef_index),
            r.selected ? "1" : "0",
            format_number(r.estimate),
            format_number(r.lower),
            format_number(r.upper),
            r.reported ? (r.degenerate ? "1" : "0") : "NA",
            r.target_kind.empty() ? "NA" : r.target_kind,
            format_number(r.target_value),
            format_number(r.beta0),
            format_flag(r.covered),
            format_flag(r.rejected_zero),
            format_number(r.runtime_seconds),
            std::to_string(r.model_size),
            format_number(r.p_true),
            format_number(r.ibs),
            format_number(r.cindex),
            r.flags};
}

inline IntervalRecord from_fields(const std::vector<std::string>& f)
{
    if (f.size() != long_header().size()) throw Error("long CSV: wrong number of fields");
    IntervalRecord r;
    r.scenario_id = f[0];
    r.n = parse_int(f[1]);
    r.p = parse_int(f[2]);
    r.rho = parse_number(f[3]);
    r.censor_target = parse_number(f[4]);
    r.baseline = f[5];
    r.pattern = f[6];
    r.flavor = f[7];
    r.method = f[8];
    r.tuning = f[9];
    r.iteration = parse_int(f[10]);
    r.coef_index = parse_int(f[11]);
    r.selected = parse_flag(f[12]) == 1;
    r.estimate = parse_number(f[13]);
    r.lower = parse_number(f[14]);
    r.upper = parse_number(f[15]);
    r.reported = f[16] != "NA";
    r.degenerate = f[16] == "1";
    r.target_kind = f[17] == "NA" ? "" : f[17];
    r.target_value = parse_number(f[18]);
    r.beta0 = parse_number(f[19]);
    r.covered = parse_flag(f[20]);
    r.rejected_zero = parse_flag(f[21]);
    r.runtime_seconds = parse_number(f[22]);
    r.model_size = parse_int(f[23]);
    r.p_true = parse_number(f[24]);
    r.ibs = parse_number(f[25]);
    r.cindex = parse_number(f[26]);
    r.flags = f[27];
    return r;
}

inline bool record_less(const IntervalRecord& a, const IntervalRecord& b)
{
    return std::tie(a.scenario_id, a.iteration, a.flavor, a.method, a.tuning, a.coef_index) <
           std::tie(b.scenario_id, b.iteration, b.flavor, b.method, b.tuning, b.coef_index);
}

inline void write_long(std::ostream& out, const std::vector<IntervalRecord>& records, bool header = true)
{
    if (header) out << join_row(long_header()) << '\n';
    for (const auto& r : records) out << join_row(to_fields(r)) << '\n';
}

inline std::vector<IntervalRecord> read_long(std::istream& in)
{
    const auto t = read_csv(in);
    if (t.header != long_header()) throw Error("long CSV: unexpected header");
    std::vector<IntervalRecord> out;
    out.reserve(t.rows.size());
    for (const auto& row : t.rows) out.push_back(from_fields(row));
    return out;
}

inline std::vector<IntervalRecord> read_long_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    return read_long(in);
}

// ---------------------------------------------------------------------------
// Summary table
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& summary_header()
{
    static const std::vector<std::string> h{
        "block",          "scenario_id",   "n",               "p",            "rho",
        "censor_target",  "baseline",      "pattern",         "lasso_flavor", "method",
        "tuning",         "coef_index",    "cells",           "iterations",   "reported",
        "degenerate",     "coverage",      "coverage_se",     "coverage_count", "width_median",
        "width_q25",      "width_q75",     "width_finite",    "width_excluded", "power",
        "power_se",       "power_count",   "type1",           "type1_se",     "type1_count",
        "mean_model_size", "mean_p_true",  "empty_selections", "mean_ibs",    "mean_cindex",
        "failure_rate",   "flagged"};
    return h;
}

inline std::vector<std::string> to_fields(const SummaryRow& row)
{
    const auto* e = row.exemplar;
    const auto& s = row.stats;
    const auto cnt = [](long c) { return std::to_string(c); };
    return {row.block,
            row.key.scenario_id,
            e ? std::to_string(e->n) : "NA",
            e ? std::to_string(e->p) : "NA",
            e ? format_number(e->rho) : "NA",
            e ? format_number(e->censor_target) : "NA",
            e ? e->baseline : "NA",
            e ? e->pattern : "NA",
            row.key.flavor,
            row.key.method,
            row.key.tuning,
            row.coef,
            cnt(row.block == "coef" || row.block == "cell" ? 1 : row.cells),
            cnt(s.iterations),
            cnt(s.reported),
            cnt(s.degenerate),
            format_number(s.coverage.value),
            format_number(s.coverage.se),
            cnt(s.coverage.count),
            format_number(s.width.median),
            format_number(s.width.q25),
            format_number(s.width.q75),
            cnt(s.width.finite),
            cnt(s.width.excluded),
            format_number(s.power.value),
            format_number(s.power.se),
            cnt(s.power.count),
            format_number(s.type1.value),
            format_number(s.type1.se),
            cnt(s.type1.count),
            format_number(s.mean_model_size),
            format_number(s.mean_p_true),
            cnt(s.empty_selections),
            format_number(s.mean_ibs),
            format_number(s.mean_cindex),
            format_number(s.failure_rate),
            row.flagged ? "1" : "0"};
}

inline void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows)
{
    out << join_row(summary_header()) << '\n';
    for (const auto& r : rows) out << join_row(to_fields(r)) << '\n';
}

} // namespace coxsel::harness
