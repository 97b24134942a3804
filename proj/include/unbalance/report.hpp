#pragma once

// CSV, JSON and text-table renderings of index, bounds and scenario results.

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "unbalance/bounds.hpp"
#include "unbalance/error.hpp"
#include "unbalance/metrics.hpp"
#include "unbalance/scenario.hpp"

namespace unbalance {

using ojson = nlohmann::ordered_json;

enum class FormatKind { Csv, Json, Table };

inline std::optional<FormatKind> parse_format_kind(std::string_view s) {
    if (s == "csv") return FormatKind::Csv;
    if (s == "json") return FormatKind::Json;
    if (s == "table") return FormatKind::Table;
    return std::nullopt;
}

/// JSON output always carries full precision; `precision` applies to CSV and
/// tables unless `full_precision` is set.
struct OutputFormat {
    FormatKind kind = FormatKind::Table;
    int precision = 3;
    bool full_precision = false;

    void validate() const { require(precision >= 0 && precision <= 12, "precision must be in [0, 12]"); }
};

inline std::string format_number(double x, const OutputFormat& f) {
    char buf[64];
    if (f.full_precision) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
    } else {
        std::snprintf(buf, sizeof buf, "%.*f", f.precision, x);
        if (std::string_view(buf).find_first_not_of("-0.") == std::string_view::npos && buf[0] == '-') {
            return buf + 1;  // no "-0.000"
        }
    }
    return buf;
}

/// Column-aligned text; the first row is the header.
class TextTable {
public:
    void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

    void write(std::ostream& os) const {
        std::vector<std::size_t> width;
        for (const auto& r : rows_) {
            width.resize(std::max(width.size(), r.size()), 0);
            for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
        }
        for (std::size_t n = 0; n < rows_.size(); ++n) {
            const auto& r = rows_[n];
            std::string line;
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (i) line += "  ";
                const std::string pad(width[i] - r[i].size(), ' ');
                line += i == 0 ? r[i] + pad : pad + r[i];
            }
            while (!line.empty() && line.back() == ' ') line.pop_back();
            os << line << '\n';
            if (n == 0) {
                std::size_t total = 0;
                for (std::size_t i = 0; i < width.size(); ++i) total += width[i] + (i ? 2 : 0);
                os << std::string(total, '-') << '\n';
            }
        }
    }

private:
    std::vector<std::vector<std::string>> rows_;
};

inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

inline void write_csv_row(std::ostream& os, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) os << (i ? "," : "") << csv_field(fields[i]);
    os << '\n';
}

// ---------------------------------------------------------------------------
// JSON

inline ojson to_json(const MetricDetail& m) {
    ojson inter = ojson::object();
    for (const auto& i : m.intermediates) inter[i.name] = i.value;
    return {{"value", m.value}, {"intermediates", inter}};
}

inline MetricDetail metric_from_json(IndexKind kind, const ojson& j) {
    MetricDetail m{kind, j.at("value").get<double>(), {}};
    for (const auto& [name, value] : j.at("intermediates").items()) m.intermediates.push_back({name, value.get<double>()});
    return m;
}

inline ojson to_json(const IndexSet& s) {
    ojson j = ojson::object();
    for (IndexKind k : all_indices) j[std::string(to_string(k))] = to_json(s[k]);
    return j;
}

inline IndexSet index_set_from_json(const ojson& j) {
    auto get = [&](IndexKind k) { return metric_from_json(k, j.at(std::string(to_string(k)))); };
    return {get(IndexKind::VUF), get(IndexKind::LVUR), get(IndexKind::CIGRE), get(IndexKind::PVUR1),
            get(IndexKind::PVUR2)};
}

inline ojson to_json(const MetricsReport& r) {
    ojson rows = ojson::array();
    for (const auto& row : r.rows) {
        ojson j{{"bus", row.bus}, {"distance_m", row.distance_m}, {"voltage_pu", row.voltage_pu}};
        if (row.indices) {
            j["indices"] = to_json(*row.indices);
            ojson err = ojson::object();
            for (std::size_t k = 0; k < relative_indices.size(); ++k) err[std::string(to_string(relative_indices[k]))] = row.abs_error[k];
            j["abs_error"] = err;
        } else {
            j["indices"] = nullptr;
            j["abs_error"] = nullptr;
        }
        j["diagnostic"] = row.diagnostic;
        rows.push_back(std::move(j));
    }
    return rows;
}

inline MetricsReport report_from_json(const ojson& j) {
    try {
        MetricsReport r;
        for (const auto& x : j) {
            BusMetrics row;
            row.bus = x.at("bus").get<std::string>();
            row.distance_m = x.at("distance_m").get<double>();
            row.voltage_pu = x.at("voltage_pu").get<std::array<double, 3>>();
            if (!x.at("indices").is_null()) {
                row.indices = index_set_from_json(x.at("indices"));
                for (std::size_t k = 0; k < relative_indices.size(); ++k) {
                    row.abs_error[k] = x.at("abs_error").at(std::string(to_string(relative_indices[k]))).get<double>();
                }
            }
            row.diagnostic = x.at("diagnostic").get<std::string>();
            r.rows.push_back(std::move(row));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ParseError, std::string("metrics report: ") + e.what());
    }
}

inline ojson to_json(const Stats& s) {
    return {{"max", s.max}, {"min", s.min}, {"mean", s.mean}, {"count", s.count}};
}

inline ojson to_json(const SummaryStats& s) {
    ojson values = ojson::object(), errors = ojson::object();
    for (const auto& [k, v] : s.values) values[std::string(to_string(k))] = to_json(v);
    for (const auto& [k, v] : s.errors) errors[std::string(to_string(k))] = to_json(v);
    return {{"values", values}, {"abs_error", errors}};
}

inline SummaryStats summary_from_json(const ojson& j) {
    try {
        SummaryStats s;
        auto read = [](const ojson& o, std::map<IndexKind, Stats>& into) {
            for (const auto& [name, v] : o.items()) {
                auto k = parse_index_kind(name);
                if (!k) fail(ErrorKind::ParseError, "unknown index '" + name + "'");
                into[*k] = {v.at("max").get<double>(), v.at("min").get<double>(), v.at("mean").get<double>(),
                            v.at("count").get<std::size_t>()};
            }
        };
        read(j.at("values"), s.values);
        read(j.at("abs_error"), s.errors);
        return s;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ParseError, std::string("summary: ") + e.what());
    }
}

inline ojson solver_json(const FeederModel& model, const Solution& sol) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t b = 0; b < model.bus_count(); ++b) {
        for (double m : sol.phasors_pu(b).magnitudes()) {
            lo = std::min(lo, m);
            hi = std::max(hi, m);
        }
    }
    return {{"converged", sol.converged},
            {"iterations", sol.iterations},
            {"max_residual_kva", sol.max_residual_kva},
            {"min_voltage_pu", lo},
            {"max_voltage_pu", hi}};
}

inline ojson to_json(const ScenarioRun& run) {
    return {{"phase_kw", phase_totals_kw(run.model)},
            {"pv_kw", std::accumulate(run.model.pv_units().begin(), run.model.pv_units().end(), 0.0,
                                      [](double acc, const PvUnit& p) { return acc + p.kw; })},
            {"solver", solver_json(run.model, run.solution)},
            {"buses", to_json(run.report)},
            {"summary", to_json(run.summary)}};
}

inline ojson deltas_json(const Comparison& c) {
    ojson d{{"VUF_mean", c.vuf_mean_delta}};
    ojson e = ojson::object();
    for (const auto& [k, v] : c.error_mean_delta) e[std::string(to_string(k))] = v;
    d["abs_error_mean"] = e;
    return d;
}

inline ojson to_json(const Comparison& c) {
    return {{"scenario", c.scenario}, {"without_pv", to_json(c.before)}, {"with_pv", to_json(c.after)},
            {"deltas", deltas_json(c)}};
}

inline ojson to_json(const PhasorTriple& v) {
    ojson out = ojson::array();
    for (Phase p : all_phases) out.push_back({{"magnitude", v[p].magnitude()}, {"angle_deg", v[p].angle_deg()}});
    return out;
}

inline ojson to_json(const BandCell& cell) {
    ojson j{{"band", {cell.band.lo, cell.band.hi}}, {"index", to_string(cell.index)}};
    if (cell.result) {
        const BoundsResult& r = *cell.result;
        j["lower"] = r.lower;
        j["upper"] = r.upper;
        j["arg_lower"] = to_json(r.arg_lower);
        j["arg_upper"] = to_json(r.arg_upper);
        j["samples_in_band"] = r.samples_in_band;
    } else {
        j["error"] = cell.error;
    }
    return j;
}

// ---------------------------------------------------------------------------
// Text and CSV

inline void write_metrics(std::ostream& os, const IndexSet& s, const OutputFormat& f) {
    if (f.kind == FormatKind::Json) {
        os << to_json(s).dump(2) << '\n';
        return;
    }
    const bool csv = f.kind == FormatKind::Csv;
    TextTable t;
    t.add({"index", "value", "intermediates"});
    if (csv) write_csv_row(os, {"index", "value", "intermediates"});
    for (IndexKind k : all_indices) {
        std::string inter;
        for (const auto& i : s[k].intermediates) inter += (inter.empty() ? "" : " ") + i.name + "=" + format_number(i.value, f);
        std::vector<std::string> row{std::string(to_string(k)), format_number(s[k].value, f), inter};
        if (csv) {
            write_csv_row(os, row);
        } else {
            t.add(std::move(row));
        }
    }
    if (!csv) t.write(os);
}

inline void write_bounds(std::ostream& os, std::span<const BandCell> cells, const OutputFormat& f) {
    if (f.kind == FormatKind::Json) {
        ojson j = ojson::array();
        for (const auto& c : cells) j.push_back(to_json(c));
        os << j.dump(2) << '\n';
        return;
    }
    const std::vector<std::string> header{"band", "index", "lower", "upper", "samples"};
    TextTable t;
    t.add(header);
    if (f.kind == FormatKind::Csv) write_csv_row(os, {"band_lo", "band_hi", "index", "lower", "upper", "samples_in_band"});
    for (const auto& c : cells) {
        const std::string lo = c.result ? format_number(c.result->lower, f) : "empty";
        const std::string hi = c.result ? format_number(c.result->upper, f) : "empty";
        const std::string n = c.result ? std::to_string(c.result->samples_in_band) : "0";
        if (f.kind == FormatKind::Csv) {
            write_csv_row(os, {format_number(c.band.lo, f), format_number(c.band.hi, f), std::string(to_string(c.index)), lo, hi, n});
        } else {
            t.add({format_number(c.band.lo, f) + "-" + format_number(c.band.hi, f) + "%", std::string(to_string(c.index)), lo, hi, n});
        }
    }
    if (f.kind == FormatKind::Table) t.write(os);
}

/// Per-bus plot data: one column per index and per absolute error, rows in
/// main-line distance order.
inline void write_bus_rows(std::ostream& os, const MetricsReport& r, const OutputFormat& f) {
    std::vector<std::string> header{"bus", "distance_m", "va_pu", "vb_pu", "vc_pu"};
    for (IndexKind k : all_indices) header.emplace_back(to_string(k));
    for (IndexKind k : relative_indices) header.push_back("err_" + std::string(to_string(k)));
    header.emplace_back("diagnostic");
    TextTable t;
    const bool csv = f.kind == FormatKind::Csv;
    if (csv) {
        write_csv_row(os, header);
    } else {
        t.add(header);
    }
    for (const auto& row : r.rows) {
        std::vector<std::string> out{row.bus, format_number(row.distance_m, f)};
        for (double v : row.voltage_pu) out.push_back(format_number(v, f));
        for (IndexKind k : all_indices) out.push_back(row.indices ? format_number((*row.indices)[k].value, f) : "");
        for (std::size_t k = 0; k < relative_indices.size(); ++k) out.push_back(row.indices ? format_number(row.abs_error[k], f) : "");
        out.push_back(row.diagnostic);
        if (csv) {
            write_csv_row(os, out);
        } else {
            t.add(std::move(out));
        }
    }
    if (!csv) t.write(os);
}

inline void write_summary(std::ostream& os, const SummaryStats& s, const OutputFormat& f) {
    const bool csv = f.kind == FormatKind::Csv;
    TextTable t;
    const std::vector<std::string> header{"quantity", "max", "min", "mean", "count"};
    if (csv) {
        write_csv_row(os, header);
    } else {
        t.add(header);
    }
    auto emit = [&](const std::string& name, const Stats& st) {
        std::vector<std::string> row{name, format_number(st.max, f), format_number(st.min, f), format_number(st.mean, f),
                                     std::to_string(st.count)};
        if (csv) {
            write_csv_row(os, row);
        } else {
            t.add(std::move(row));
        }
    };
    for (const auto& [k, st] : s.values) emit(std::string(to_string(k)), st);
    for (const auto& [k, st] : s.errors) emit("|" + std::string(to_string(k)) + "-VUF|", st);
    if (!csv) t.write(os);
}

inline void write_deltas(std::ostream& os, const Comparison& c, const OutputFormat& f) {
    const bool csv = f.kind == FormatKind::Csv;
    TextTable t;
    const std::vector<std::string> header{"quantity", "without_pv", "with_pv", "delta"};
    if (csv) {
        write_csv_row(os, header);
    } else {
        t.add(header);
    }
    auto emit = [&](const std::string& name, double before, double after) {
        std::vector<std::string> row{name, format_number(before, f), format_number(after, f), format_number(after - before, f)};
        if (csv) {
            write_csv_row(os, row);
        } else {
            t.add(std::move(row));
        }
    };
    emit("mean VUF", c.before.summary.values.at(IndexKind::VUF).mean, c.after.summary.values.at(IndexKind::VUF).mean);
    for (IndexKind k : relative_indices) {
        emit("mean |" + std::string(to_string(k)) + "-VUF|", c.before.summary.errors.at(k).mean, c.after.summary.errors.at(k).mean);
    }
    if (!csv) t.write(os);
}

}  // namespace unbalance
