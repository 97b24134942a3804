#pragma once

// Load-skew scenarios, PV fleets and per-bus index reports.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "unbalance/error.hpp"
#include "unbalance/feeder.hpp"
#include "unbalance/metrics.hpp"
#include "unbalance/powerflow.hpp"

namespace unbalance {

/// Loads sorted by bus id, phases dealt in proportion to the target shares.
constexpr std::string_view id_sorted_deal = "id-sorted-deal";

struct ScenarioSpec {
    std::string name;
    double total_kw = 0.0;
    std::array<double, 3> phase_shares{};  ///< percent of total_kw on phases a, b, c
    double power_factor = 0.95;
    std::string allocation_policy{id_sorted_deal};

    void validate() const {
        if (!(std::isfinite(total_kw) && total_kw > 0.0)) {
            fail(ErrorKind::SharesInfeasible, "scenario '" + name + "' needs total_kw > 0");
        }
        double sum = 0.0;
        for (double s : phase_shares) {
            if (!(std::isfinite(s) && s >= 0.0)) fail(ErrorKind::SharesInfeasible, "phase shares must be >= 0");
            sum += s;
        }
        if (std::abs(sum - 100.0) > 0.1) {
            fail(ErrorKind::SharesInfeasible, "phase shares sum to " + std::to_string(sum) + ", not 100");
        }
        require(power_factor > 0.0 && power_factor <= 1.0, "power factor outside (0, 1]");
        require(allocation_policy == id_sorted_deal, "unknown allocation policy '" + allocation_policy + "'");
    }
};

/// Per-phase counts for n items by largest remainder; ties go to the
/// earlier phase.
inline std::array<std::size_t, 3> largest_remainder(std::size_t n, const std::array<double, 3>& shares) {
    const double sum = shares[0] + shares[1] + shares[2];
    require(sum > 0.0, "phase shares must not all be zero");
    std::array<std::size_t, 3> count{};
    std::array<double, 3> frac{};
    std::size_t used = 0;
    for (int p = 0; p < 3; ++p) {
        const double exact = shares[p] / sum * static_cast<double>(n);
        count[p] = static_cast<std::size_t>(std::floor(exact));
        frac[p] = exact - std::floor(exact);
        used += count[p];
    }
    std::array<int, 3> rank{0, 1, 2};
    std::stable_sort(rank.begin(), rank.end(), [&](int a, int b) { return frac[a] > frac[b]; });
    for (std::size_t k = 0; used < n; ++k, ++used) ++count[rank[k % 3]];
    return count;
}

/// Phase for each of n positions: quotas from largest_remainder, dealt so
/// that every prefix stays as close as possible to the target shares.
inline std::vector<Phase> deal_phases(std::size_t n, const std::array<double, 3>& shares) {
    const auto quota = largest_remainder(n, shares);
    const double sum = shares[0] + shares[1] + shares[2];
    std::array<std::size_t, 3> dealt{};
    std::vector<Phase> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        int pick = -1;
        double best = 0.0;
        for (int p = 0; p < 3; ++p) {
            if (dealt[p] >= quota[p]) continue;
            const double deficit = shares[p] / sum * static_cast<double>(i + 1) - static_cast<double>(dealt[p]);
            if (pick < 0 || deficit > best) {
                pick = p;
                best = deficit;
            }
        }
        ++dealt[pick];
        out.push_back(static_cast<Phase>(pick));
    }
    return out;
}

/// Reassigns load phases and rescales every load by one common factor so
/// the feeder carries spec.total_kw split close to spec.phase_shares.
inline FeederModel build_scenario(const FeederModel& model, const ScenarioSpec& spec) {
    spec.validate();
    if (model.loads().empty()) fail(ErrorKind::SharesInfeasible, "feeder has no loads to allocate");

    std::vector<std::size_t> order(model.loads().size());
    std::iota(order.begin(), order.end(), 0);
    const auto& loads = model.loads();
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const std::string& ba = model.bus_id(loads[a].bus);
        const std::string& bb = model.bus_id(loads[b].bus);
        if (ba != bb) return bus_id_less(ba, bb);
        return bus_id_less(loads[a].name, loads[b].name);
    });

    const double base = std::accumulate(loads.begin(), loads.end(), 0.0,
                                        [](double acc, const LoadPoint& l) { return acc + l.kw; });
    const double n = static_cast<double>(loads.size());
    const auto phases = deal_phases(loads.size(), spec.phase_shares);

    std::vector<LoadPoint> out = loads;
    for (std::size_t k = 0; k < order.size(); ++k) {
        LoadPoint& l = out[order[k]];
        l.phase = phases[k];
        l.kw = base > 0.0 ? l.kw * (spec.total_kw / base) : spec.total_kw / n;
        l.power_factor = spec.power_factor;
    }
    return model.with_loads(std::move(out));
}

/// Achieved kW per phase.
inline std::array<double, 3> phase_totals_kw(const FeederModel& model) {
    std::array<double, 3> t{};
    for (const auto& l : model.loads()) t[index_of(l.phase)] += l.kw;
    return t;
}

struct PVSpec {
    double unit_kw = 2.5;
    std::vector<std::string> bus_assignment;
    std::vector<Phase> phase_assignment;

    std::size_t unit_count() const { return bus_assignment.size(); }
    double total_kw() const { return unit_kw * static_cast<double>(unit_count()); }

    void validate() const {
        require(std::isfinite(unit_kw) && unit_kw >= 0.0, "PV unit rating must be >= 0");
        require(bus_assignment.size() == phase_assignment.size(), "PV bus and phase assignments differ in length");
    }
};

/// `count` units on load buses spread uniformly by index over the id-sorted
/// load buses, phases dealt by `phase_shares`.
inline PVSpec uniform_pv_fleet(const FeederModel& model, std::size_t count, double unit_kw,
                               const std::array<double, 3>& phase_shares) {
    PVSpec pv{unit_kw, {}, {}};
    if (count == 0) return pv;
    const auto buses = model.load_buses();
    require(!buses.empty(), "uniform PV placement needs at least one load bus");
    for (std::size_t i = 0; i < count; ++i) pv.bus_assignment.push_back(model.bus_id(buses[i * buses.size() / count]));
    pv.phase_assignment = deal_phases(count, phase_shares);
    return pv;
}

inline FeederModel apply_pv(const FeederModel& model, const PVSpec& pv) {
    pv.validate();
    std::vector<PvUnit> units = model.pv_units();
    for (std::size_t i = 0; i < pv.unit_count(); ++i) {
        auto bus = model.find_bus(pv.bus_assignment[i]);
        if (!bus) fail(ErrorKind::DanglingReference, "PV unit on unknown bus '" + pv.bus_assignment[i] + "'");
        units.push_back({*bus, pv.phase_assignment[i], pv.unit_kw});
    }
    return model.with_pv(std::move(units));
}

struct RepresentativeBuses {
    std::vector<std::size_t> buses;
    bool degenerate = false;  ///< fewer than nine distinct buses were found
};

/// Start, middle and end of three equal-length zones of the main line.
/// Each pick is the main-line bus inside its zone nearest the target
/// distance (lowest id on ties); an empty zone falls back to the whole line.
inline RepresentativeBuses representative_buses(const FeederModel& model) {
    const auto line = main_line(model);
    const double length = model.cumulative_length_m(line.back());
    RepresentativeBuses out;
    for (int zone = 0; zone < 3; ++zone) {
        const double start = length * zone / 3.0;
        const double end = length * (zone + 1) / 3.0;
        std::vector<std::size_t> members;
        for (std::size_t b : line) {
            const double d = model.cumulative_length_m(b);
            if ((d >= start && d < end) || (zone == 2 && d == end)) members.push_back(b);
        }
        if (members.empty()) members = line;
        for (double target : {start, (start + end) / 2.0, end}) {
            std::size_t pick = members.front();
            for (std::size_t b : members) {
                const double e = std::abs(model.cumulative_length_m(b) - target);
                const double best = std::abs(model.cumulative_length_m(pick) - target);
                if (e < best || (e == best && bus_id_less(model.bus_id(b), model.bus_id(pick)))) pick = b;
            }
            if (std::find(out.buses.begin(), out.buses.end(), pick) == out.buses.end()) out.buses.push_back(pick);
        }
    }
    out.degenerate = out.buses.size() < 9;
    return out;
}

enum class BusSelection { Representative, All };

/// Buses to report on, ordered by distance from the source.
inline std::vector<std::size_t> select_buses(const FeederModel& model, BusSelection sel) {
    if (sel == BusSelection::Representative) return representative_buses(model).buses;
    std::vector<std::size_t> all(model.bus_count());
    std::iota(all.begin(), all.end(), 0);
    std::stable_sort(all.begin(), all.end(), [&](std::size_t a, std::size_t b) {
        const double da = model.cumulative_length_m(a), db = model.cumulative_length_m(b);
        if (da != db) return da < db;
        return bus_id_less(model.bus_id(a), model.bus_id(b));
    });
    return all;
}

struct BusMetrics {
    std::string bus;
    double distance_m = 0.0;
    std::array<double, 3> voltage_pu{};
    std::optional<IndexSet> indices;
    /// |index - VUF| for LVUR, CIGRE, PVUR1, PVUR2.
    std::array<double, 4> abs_error{};
    std::string diagnostic;

    friend bool operator==(const BusMetrics&, const BusMetrics&) = default;
};

struct MetricsReport {
    std::vector<BusMetrics> rows;

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

inline MetricsReport evaluate(const FeederModel& model, const Solution& sol, const std::vector<std::size_t>& buses) {
    require(sol.converged, "evaluate needs a converged solution");
    MetricsReport report;
    for (std::size_t b : buses) {
        BusMetrics row;
        row.bus = model.bus_id(b);
        row.distance_m = model.cumulative_length_m(b);
        const PhasorTriple v = sol.phasors_pu(b);
        row.voltage_pu = v.magnitudes();
        try {
            IndexSet set = compute_all(v);
            for (std::size_t k = 0; k < relative_indices.size(); ++k) {
                row.abs_error[k] = absolute_error(set[relative_indices[k]].value, set.vuf.value);
            }
            row.indices = std::move(set);
        } catch (const Error& e) {
            row.diagnostic = e.what();
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

struct Stats {
    double max = 0.0;
    double min = 0.0;
    double mean = 0.0;
    std::size_t count = 0;

    friend bool operator==(const Stats&, const Stats&) = default;
};

inline Stats stats_of(const std::vector<double>& xs) {
    Stats s;
    if (xs.empty()) return s;
    s.max = *std::max_element(xs.begin(), xs.end());
    s.min = *std::min_element(xs.begin(), xs.end());
    s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    s.count = xs.size();
    return s;
}

struct SummaryStats {
    std::map<IndexKind, Stats> values;  ///< all five indices
    std::map<IndexKind, Stats> errors;  ///< |index - VUF| for the relative indices

    friend bool operator==(const SummaryStats&, const SummaryStats&) = default;
};

inline SummaryStats summarize(const MetricsReport& r) {
    SummaryStats s;
    for (IndexKind k : all_indices) {
        std::vector<double> xs;
        for (const auto& row : r.rows) {
            if (row.indices) xs.push_back((*row.indices)[k].value);
        }
        s.values[k] = stats_of(xs);
    }
    for (std::size_t k = 0; k < relative_indices.size(); ++k) {
        std::vector<double> xs;
        for (const auto& row : r.rows) {
            if (row.indices) xs.push_back(row.abs_error[k]);
        }
        s.errors[relative_indices[k]] = stats_of(xs);
    }
    return s;
}

struct ScenarioRun {
    FeederModel model;
    Solution solution;
    MetricsReport report;
    SummaryStats summary;
};

inline ScenarioRun run_scenario(const FeederModel& base, const ScenarioSpec& spec, const std::optional<PVSpec>& pv,
                                BusSelection sel = BusSelection::Representative, const SolveOptions& opts = {}) {
    FeederModel model = build_scenario(base, spec);
    if (pv) model = apply_pv(model, *pv);
    Solution sol = solve_snapshot(model, opts);
    MetricsReport report = evaluate(model, sol, select_buses(model, sel));
    SummaryStats summary = summarize(report);
    return {std::move(model), std::move(sol), std::move(report), std::move(summary)};
}

struct Comparison {
    std::string scenario;
    ScenarioRun before;
    ScenarioRun after;
    double vuf_mean_delta = 0.0;
    /// Change of mean |index - VUF| after PV; negative means the index got closer to VUF.
    std::map<IndexKind, double> error_mean_delta;
};

inline Comparison compare_before_after(const FeederModel& base, const ScenarioSpec& spec, const PVSpec& pv,
                                       BusSelection sel = BusSelection::Representative, const SolveOptions& opts = {}) {
    auto leg = [&](const std::optional<PVSpec>& fleet, const char* name) {
        try {
            return run_scenario(base, spec, fleet, sel, opts);
        } catch (const Error& e) {
            throw Error(e.kind(), std::string(name) + " leg of '" + spec.name + "': " + e.what());
        }
    };
    ScenarioRun before = leg(std::nullopt, "without-PV");
    ScenarioRun after = leg(pv, "with-PV");
    Comparison c{spec.name, std::move(before), std::move(after), 0.0, {}};
    c.vuf_mean_delta = c.after.summary.values.at(IndexKind::VUF).mean - c.before.summary.values.at(IndexKind::VUF).mean;
    for (IndexKind k : relative_indices) {
        c.error_mean_delta[k] = c.after.summary.errors.at(k).mean - c.before.summary.errors.at(k).mean;
    }
    return c;
}

// ---------------------------------------------------------------------------
// Spec files

inline ScenarioSpec scenario_from_json(const nlohmann::json& j) {
    try {
        ScenarioSpec s;
        s.name = j.value("name", std::string{});
        s.total_kw = j.at("total_kw").get<double>();
        s.phase_shares = j.at("phase_shares").get<std::array<double, 3>>();
        s.power_factor = j.value("power_factor", 0.95);
        s.allocation_policy = j.value("allocation_policy", std::string(id_sorted_deal));
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ParseError, std::string("scenario spec: ") + e.what());
    }
}

inline nlohmann::ordered_json to_json(const ScenarioSpec& s) {
    return {{"name", s.name},
            {"total_kw", s.total_kw},
            {"phase_shares", s.phase_shares},
            {"power_factor", s.power_factor},
            {"allocation_policy", s.allocation_policy}};
}

/// PV file: either explicit {"units": [{"bus", "phase"}...]} or
/// {"unit_count", "placement": "uniform", "phase_shares"}; both take "unit_kw".
inline PVSpec pv_from_json(const nlohmann::json& j, const FeederModel& model) {
    try {
        const double unit_kw = j.value("unit_kw", 2.5);
        if (j.contains("units")) {
            PVSpec pv{unit_kw, {}, {}};
            for (const auto& u : j.at("units")) {
                pv.bus_assignment.push_back(u.at("bus").get<std::string>());
                auto p = detail::parse_phase(u.at("phase").get<std::string>());
                if (!p) fail(ErrorKind::ParseError, "unknown PV phase " + u.at("phase").dump());
                pv.phase_assignment.push_back(*p);
            }
            pv.validate();
            return pv;
        }
        const std::string placement = j.value("placement", std::string("uniform"));
        if (placement != "uniform") fail(ErrorKind::ParseError, "unknown PV placement '" + placement + "'");
        const auto count = j.at("unit_count").get<std::size_t>();
        const auto shares = j.value("phase_shares", std::array<double, 3>{100.0 / 3, 100.0 / 3, 100.0 / 3});
        return uniform_pv_fleet(model, count, unit_kw, shares);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ParseError, std::string("PV spec: ") + e.what());
    }
}

inline nlohmann::ordered_json to_json(const PVSpec& pv) {
    nlohmann::ordered_json units = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < pv.unit_count(); ++i) {
        units.push_back({{"bus", pv.bus_assignment[i]}, {"phase", std::string(1, phase_letter(pv.phase_assignment[i]))}});
    }
    return {{"unit_kw", pv.unit_kw}, {"units", units}};
}

}  // namespace unbalance
