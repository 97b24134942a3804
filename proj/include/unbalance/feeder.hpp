#pragma once

// Radial LV feeder model.
//
// Canonical units inside the model are ohms, meters, kW and volts; per unit
// appears only at the reporting boundary. Two input forms are supported:
// the delimited text files of the IEEE European LV test feeder and a
// versioned JSON document (see docs/feeder_format.md).

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "unbalance/error.hpp"
#include "unbalance/phasor.hpp"

namespace unbalance {

using Matrix3c = Eigen::Matrix3cd;
using Vector3c = Eigen::Vector3cd;

constexpr std::size_t no_index = std::numeric_limits<std::size_t>::max();

/// Orders bus ids with embedded numbers by value, so "2" < "10".
inline bool bus_id_less(std::string_view a, std::string_view b) {
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const bool da = std::isdigit(static_cast<unsigned char>(a[i])) != 0;
        const bool db = std::isdigit(static_cast<unsigned char>(b[j])) != 0;
        if (da && db) {
            std::size_t ei = i, ej = j;
            while (ei < a.size() && std::isdigit(static_cast<unsigned char>(a[ei]))) ++ei;
            while (ej < b.size() && std::isdigit(static_cast<unsigned char>(b[ej]))) ++ej;
            std::string_view na = a.substr(i, ei - i), nb = b.substr(j, ej - j);
            while (na.size() > 1 && na.front() == '0') na.remove_prefix(1);
            while (nb.size() > 1 && nb.front() == '0') nb.remove_prefix(1);
            if (na.size() != nb.size()) return na.size() < nb.size();
            if (na != nb) return na < nb;
            i = ei;
            j = ej;
        } else {
            if (a[i] != b[j]) return a[i] < b[j];
            ++i;
            ++j;
        }
    }
    if ((a.size() - i) != (b.size() - j)) return (a.size() - i) < (b.size() - j);
    return a < b;
}

struct LineCode {
    std::string name;
    double r1_ohm_per_km = 0.0;
    double x1_ohm_per_km = 0.0;
    double r0_ohm_per_km = 0.0;
    double x0_ohm_per_km = 0.0;
    double c1_nf_per_km = 0.0;  ///< kept for completeness; the solver ignores shunt capacitance
    double c0_nf_per_km = 0.0;

    friend bool operator==(const LineCode&, const LineCode&) = default;
};

struct Bus {
    std::string id;
    std::optional<std::array<double, 2>> xy;

    friend bool operator==(const Bus&, const Bus&) = default;
};

struct LineSegment {
    std::string name;
    std::size_t from_bus;
    std::size_t to_bus;
    double length_m;
    std::size_t code;

    friend bool operator==(const LineSegment&, const LineSegment&) = default;
};

struct LoadPoint {
    std::string name;
    std::size_t bus;
    Phase phase;
    double kw;
    double power_factor;  ///< lagging

    friend bool operator==(const LoadPoint&, const LoadPoint&) = default;
};

/// Single-phase grid-following generator at unity power factor.
struct PvUnit {
    std::size_t bus;
    Phase phase;
    double kw;

    friend bool operator==(const PvUnit&, const PvUnit&) = default;
};

/// Thevenin source at the LV head.
struct SourceSpec {
    std::size_t bus = 0;
    double base_kv_ll = 0.416;
    std::array<double, 3> voltage_pu{1.05, 1.05, 1.05};
    std::array<double, 3> angle_deg{0.0, -120.0, 120.0};
    Matrix3c impedance_ohm = Matrix3c::Zero();

    double phase_base_volts() const { return base_kv_ll * 1000.0 / std::numbers::sqrt3; }

    Vector3c voltage_volts() const {
        Vector3c v;
        for (int p = 0; p < 3; ++p) v[p] = voltage_pu[p] * phase_base_volts() * cis_degrees(angle_deg[p]);
        return v;
    }

    friend bool operator==(const SourceSpec&, const SourceSpec&) = default;
};

/// Phase-domain impedance per km from sequence data:
/// diagonal (Z0 + 2 Z1)/3, off-diagonal (Z0 - Z1)/3.
inline Matrix3c sequence_to_phase(Complex z1, Complex z0) {
    const Complex self = (z0 + 2.0 * z1) / 3.0;
    const Complex mutual = (z0 - z1) / 3.0;
    Matrix3c z;
    z << self, mutual, mutual, mutual, self, mutual, mutual, mutual, self;
    return z;
}

inline Matrix3c phase_impedance(const LineCode& code) {
    return sequence_to_phase({code.r1_ohm_per_km, code.x1_ohm_per_km}, {code.r0_ohm_per_km, code.x0_ohm_per_km});
}

/// Recovers (Z1, Z0) from a balanced phase matrix via the Fortescue similarity transform.
inline std::pair<Complex, Complex> phase_to_sequence(const Matrix3c& z) {
    Matrix3c a;
    a << 1.0, 1.0, 1.0, 1.0, rotation_a2, rotation_a, 1.0, rotation_a, rotation_a2;
    const Matrix3c zs = a.inverse() * z * a;
    return {zs(1, 1), zs(0, 0)};
}

/// Immutable validated radial feeder.
class FeederModel {
public:
    FeederModel(std::vector<Bus> buses, std::vector<LineCode> codes, std::vector<LineSegment> segments,
                std::vector<LoadPoint> loads, SourceSpec source, std::vector<PvUnit> pv = {})
        : buses_(std::move(buses)),
          codes_(std::move(codes)),
          segments_(std::move(segments)),
          loads_(std::move(loads)),
          pv_(std::move(pv)),
          source_(std::move(source)) {
        validate();
        derive_topology();
    }

    const std::vector<Bus>& buses() const { return buses_; }
    const std::vector<LineCode>& line_codes() const { return codes_; }
    const std::vector<LineSegment>& segments() const { return segments_; }
    const std::vector<LoadPoint>& loads() const { return loads_; }
    const std::vector<PvUnit>& pv_units() const { return pv_; }
    const SourceSpec& source() const { return source_; }

    std::size_t bus_count() const { return buses_.size(); }
    std::size_t root() const { return source_.bus; }

    std::optional<std::size_t> find_bus(std::string_view id) const {
        auto it = bus_index_.find(std::string(id));
        if (it == bus_index_.end()) return std::nullopt;
        return it->second;
    }
    const std::string& bus_id(std::size_t bus) const { return buses_.at(bus).id; }

    /// Segment feeding `bus` from its parent, or no_index at the root.
    std::size_t parent_segment(std::size_t bus) const { return parent_segment_[bus]; }
    std::size_t parent_bus(std::size_t bus) const { return parent_bus_[bus]; }
    const std::vector<std::size_t>& children(std::size_t bus) const { return children_[bus]; }
    /// Root first; every bus appears after its parent.
    const std::vector<std::size_t>& traversal_order() const { return order_; }
    /// Distance from the source bus along the tree, meters.
    double cumulative_length_m(std::size_t bus) const { return cumulative_m_[bus]; }

    /// Series impedance of a segment, ohms.
    Matrix3c segment_impedance(std::size_t segment) const {
        const LineSegment& s = segments_[segment];
        return phase_impedance(codes_[s.code]) * (s.length_m / 1000.0);
    }

    /// Distinct buses carrying at least one load.
    std::vector<std::size_t> load_buses() const {
        std::vector<std::size_t> out;
        for (const auto& l : loads_) out.push_back(l.bus);
        std::sort(out.begin(), out.end(),
                  [&](std::size_t a, std::size_t b) { return bus_id_less(buses_[a].id, buses_[b].id); });
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    FeederModel with_loads(std::vector<LoadPoint> loads) const {
        return {buses_, codes_, segments_, std::move(loads), source_, pv_};
    }
    FeederModel with_pv(std::vector<PvUnit> pv) const { return {buses_, codes_, segments_, loads_, source_, std::move(pv)}; }
    FeederModel with_source(SourceSpec source) const {
        return {buses_, codes_, segments_, loads_, std::move(source), pv_};
    }

    friend bool operator==(const FeederModel& a, const FeederModel& b) {
        return a.buses_ == b.buses_ && a.codes_ == b.codes_ && a.segments_ == b.segments_ && a.loads_ == b.loads_ &&
               a.pv_ == b.pv_ && a.source_ == b.source_;
    }

private:
    void validate() {
        require(!buses_.empty(), "feeder has no buses");
        for (std::size_t i = 0; i < buses_.size(); ++i) {
            require(!buses_[i].id.empty(), "bus id must not be empty");
            if (!bus_index_.emplace(buses_[i].id, i).second) {
                fail(ErrorKind::InvalidArgument, "duplicate bus id " + buses_[i].id);
            }
        }
        std::unordered_map<std::string, int> code_names;
        for (const auto& c : codes_) {
            require(c.r1_ohm_per_km >= 0.0 && c.x1_ohm_per_km >= 0.0 &&
                        (c.r1_ohm_per_km > 0.0 || c.x1_ohm_per_km > 0.0),
                    "line code " + c.name + " needs nonnegative r1/x1 with at least one positive");
            require(++code_names[c.name] == 1, "duplicate line code " + c.name);
        }
        auto check_bus = [&](std::size_t b, const std::string& what) {
            if (b >= buses_.size()) fail(ErrorKind::DanglingReference, what + " references an unknown bus");
        };
        for (const auto& s : segments_) {
            check_bus(s.from_bus, "segment " + s.name);
            check_bus(s.to_bus, "segment " + s.name);
            if (s.code >= codes_.size()) fail(ErrorKind::DanglingReference, "segment " + s.name + " has an unknown code");
            require(s.length_m > 0.0 && std::isfinite(s.length_m), "segment " + s.name + " needs a positive length");
            require(s.from_bus != s.to_bus, "segment " + s.name + " connects a bus to itself");
        }
        for (const auto& l : loads_) {
            check_bus(l.bus, "load " + l.name);
            require(std::isfinite(l.kw) && l.kw >= 0.0, "load " + l.name + " must have kw >= 0");
            require(l.power_factor > 0.0 && l.power_factor <= 1.0, "load " + l.name + " power factor outside (0, 1]");
        }
        for (const auto& p : pv_) {
            check_bus(p.bus, "pv unit");
            require(std::isfinite(p.kw) && p.kw >= 0.0, "pv unit rating must be >= 0");
        }
        check_bus(source_.bus, "source");
        require(source_.base_kv_ll > 0.0, "source base voltage must be positive");
        for (double m : source_.voltage_pu) {
            require(m >= 0.9 && m <= 1.1, "source voltage magnitudes must lie in [0.9, 1.1] p.u.");
        }
    }

    void derive_topology() {
        const std::size_t n = buses_.size();
        if (segments_.size() + 1 != n) {
            fail(ErrorKind::NotRadial, std::to_string(segments_.size()) + " segments for " + std::to_string(n) +
                                           " buses; a radial feeder needs exactly n-1");
        }
        std::vector<std::vector<std::size_t>> incident(n);
        for (std::size_t s = 0; s < segments_.size(); ++s) {
            incident[segments_[s].from_bus].push_back(s);
            incident[segments_[s].to_bus].push_back(s);
        }
        parent_segment_.assign(n, no_index);
        parent_bus_.assign(n, no_index);
        children_.assign(n, {});
        cumulative_m_.assign(n, 0.0);
        std::vector<bool> seen(n, false);
        std::queue<std::size_t> frontier;
        frontier.push(root());
        seen[root()] = true;
        while (!frontier.empty()) {
            const std::size_t b = frontier.front();
            frontier.pop();
            order_.push_back(b);
            for (std::size_t s : incident[b]) {
                if (s == parent_segment_[b]) continue;
                const std::size_t other = segments_[s].from_bus == b ? segments_[s].to_bus : segments_[s].from_bus;
                if (seen[other]) fail(ErrorKind::NotRadial, "segment " + segments_[s].name + " closes a loop");
                seen[other] = true;
                parent_segment_[other] = s;
                parent_bus_[other] = b;
                cumulative_m_[other] = cumulative_m_[b] + segments_[s].length_m;
                children_[b].push_back(other);
                frontier.push(other);
            }
        }
        if (order_.size() != n) fail(ErrorKind::NotRadial, "feeder is not connected to the source bus");
    }

    std::vector<Bus> buses_;
    std::vector<LineCode> codes_;
    std::vector<LineSegment> segments_;
    std::vector<LoadPoint> loads_;
    std::vector<PvUnit> pv_;
    SourceSpec source_;

    std::unordered_map<std::string, std::size_t> bus_index_;
    std::vector<std::size_t> parent_segment_;
    std::vector<std::size_t> parent_bus_;
    std::vector<std::vector<std::size_t>> children_;
    std::vector<std::size_t> order_;
    std::vector<double> cumulative_m_;
};

/// Path from the source bus to the bus with the greatest cumulative length
/// (ties go to the lowest bus id), source first.
inline std::vector<std::size_t> main_line(const FeederModel& model) {
    std::size_t far = model.root();
    for (std::size_t b : model.traversal_order()) {
        const double d = model.cumulative_length_m(b);
        const double best = model.cumulative_length_m(far);
        if (d > best || (d == best && bus_id_less(model.bus_id(b), model.bus_id(far)))) far = b;
    }
    std::vector<std::size_t> path;
    for (std::size_t b = far; b != no_index; b = model.parent_bus(b)) path.push_back(b);
    std::reverse(path.begin(), path.end());
    return path;
}

// ---------------------------------------------------------------------------
// Delimited text input

namespace detail {

struct Table {
    std::string file;
    std::vector<std::string> header;
    struct Row {
        std::size_t line;
        std::vector<std::string> fields;
    };
    std::vector<Row> rows;

    std::optional<std::size_t> column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i].size() != name.size()) continue;
            bool same = true;
            for (std::size_t k = 0; k < name.size() && same; ++k) {
                same = std::tolower(static_cast<unsigned char>(header[i][k])) ==
                       std::tolower(static_cast<unsigned char>(name[k]));
            }
            if (same) return i;
        }
        return std::nullopt;
    }

    std::size_t require_column(std::string_view name) const {
        auto c = column(name);
        if (!c) fail(ErrorKind::ParseError, file + ": missing column '" + std::string(name) + "'");
        return *c;
    }
};

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

/// Comma-separated rows; blank lines and lines starting with '#' are
/// skipped, and the first remaining line is the header.
inline Table read_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::ParseError, "cannot open " + path.string());
    Table t;
    t.file = path.filename().string();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(trim(field));
        if (!line.empty() && line.back() == ',') fields.emplace_back();
        if (t.header.empty()) {
            t.header = std::move(fields);
        } else {
            t.rows.push_back({lineno, std::move(fields)});
        }
    }
    if (t.header.empty()) fail(ErrorKind::ParseError, t.file + ": no header row");
    return t;
}

inline const std::string& field(const Table& t, const Table::Row& r, std::size_t col) {
    if (col >= r.fields.size()) {
        fail(ErrorKind::ParseError, t.file + " line " + std::to_string(r.line) + ": missing column '" + t.header[col] + "'");
    }
    return r.fields[col];
}

inline double number(const Table& t, const Table::Row& r, std::size_t col) {
    const std::string& s = field(t, r, col);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size() || !std::isfinite(v)) {
        fail(ErrorKind::ParseError, t.file + " line " + std::to_string(r.line) + ", column '" + t.header[col] +
                                        "': expected a number, got '" + s + "'");
    }
    return v;
}

inline double number_or(const Table& t, const Table::Row& r, std::optional<std::size_t> col, double fallback) {
    if (!col || *col >= r.fields.size() || r.fields[*col].empty()) return fallback;
    return number(t, r, *col);
}

/// Meters per unit of length.
inline std::optional<double> length_scale(std::string unit) {
    std::transform(unit.begin(), unit.end(), unit.begin(), [](unsigned char c) { return std::tolower(c); });
    if (unit == "m") return 1.0;
    if (unit == "km") return 1000.0;
    if (unit == "ft") return 0.3048;
    if (unit == "kft") return 304.8;
    if (unit == "mi") return 1609.344;
    return std::nullopt;
}

inline std::optional<Phase> parse_phase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "a" || s == "1") return Phase::A;
    if (s == "b" || s == "2") return Phase::B;
    if (s == "c" || s == "3") return Phase::C;
    return std::nullopt;
}

[[noreturn]] inline void row_error(const Table& t, const Table::Row& r, const std::string& msg,
                                   ErrorKind kind = ErrorKind::ParseError) {
    fail(kind, t.file + " line " + std::to_string(r.line) + ": " + msg);
}

}  // namespace detail

/// Reads LineCodes.csv, Lines.csv, Loads.csv and (optionally) Buscoords.csv
/// and Source.csv from `directory`. Other files, such as load shapes, are
/// ignored.
inline FeederModel load_feeder(const std::filesystem::path& directory) {
    using namespace detail;
    namespace fs = std::filesystem;
    if (!fs::is_directory(directory)) fail(ErrorKind::ParseError, directory.string() + " is not a directory");

    // Line codes
    std::vector<LineCode> codes;
    std::unordered_map<std::string, std::size_t> code_index;
    {
        const Table t = read_table(directory / "LineCodes.csv");
        const auto name = t.require_column("Name");
        const auto r1 = t.require_column("R1"), x1 = t.require_column("X1");
        const auto r0 = t.require_column("R0"), x0 = t.require_column("X0");
        const auto c1 = t.column("C1"), c0 = t.column("C0"), units = t.column("Units");
        for (const auto& row : t.rows) {
            LineCode c;
            c.name = field(t, row, name);
            double per_km = 1.0;
            if (units && *units < row.fields.size() && !row.fields[*units].empty()) {
                auto scale = length_scale(row.fields[*units]);
                if (!scale) row_error(t, row, "unknown length unit '" + row.fields[*units] + "'");
                per_km = 1000.0 / *scale;
            }
            c.r1_ohm_per_km = number(t, row, r1) * per_km;
            c.x1_ohm_per_km = number(t, row, x1) * per_km;
            c.r0_ohm_per_km = number(t, row, r0) * per_km;
            c.x0_ohm_per_km = number(t, row, x0) * per_km;
            c.c1_nf_per_km = number_or(t, row, c1, 0.0) * per_km;
            c.c0_nf_per_km = number_or(t, row, c0, 0.0) * per_km;
            if (c.r1_ohm_per_km < 0.0 || c.x1_ohm_per_km < 0.0 || (c.r1_ohm_per_km == 0.0 && c.x1_ohm_per_km == 0.0)) {
                row_error(t, row, "line code " + c.name + " needs nonnegative R1/X1 with one positive");
            }
            if (!code_index.emplace(c.name, codes.size()).second) row_error(t, row, "duplicate line code " + c.name);
            codes.push_back(std::move(c));
        }
    }

    // Buses
    std::vector<Bus> buses;
    std::unordered_map<std::string, std::size_t> bus_index;
    const bool have_coords = fs::exists(directory / "Buscoords.csv");
    if (have_coords) {
        const Table t = read_table(directory / "Buscoords.csv");
        const auto name = t.column("Busname") ? *t.column("Busname") : t.require_column("Bus");
        const auto x = t.require_column("x"), y = t.require_column("y");
        for (const auto& row : t.rows) {
            Bus b{field(t, row, name), std::array<double, 2>{number(t, row, x), number(t, row, y)}};
            if (!bus_index.emplace(b.id, buses.size()).second) row_error(t, row, "duplicate bus " + b.id);
            buses.push_back(std::move(b));
        }
    }
    auto bus_ref = [&](const Table& t, const Table::Row& row, const std::string& id) -> std::size_t {
        auto it = bus_index.find(id);
        if (it != bus_index.end()) return it->second;
        if (have_coords) row_error(t, row, "unknown bus '" + id + "'", ErrorKind::DanglingReference);
        bus_index.emplace(id, buses.size());
        buses.push_back({id, std::nullopt});
        return buses.size() - 1;
    };

    // Lines
    std::vector<LineSegment> segments;
    std::string first_from;
    {
        const Table t = read_table(directory / "Lines.csv");
        const auto name = t.require_column("Name");
        const auto b1 = t.require_column("Bus1"), b2 = t.require_column("Bus2");
        const auto len = t.require_column("Length"), code = t.require_column("LineCode");
        const auto units = t.column("Units");
        for (const auto& row : t.rows) {
            LineSegment s;
            s.name = field(t, row, name);
            if (first_from.empty()) first_from = field(t, row, b1);
            s.from_bus = bus_ref(t, row, field(t, row, b1));
            s.to_bus = bus_ref(t, row, field(t, row, b2));
            double scale = 1.0;
            if (units && *units < row.fields.size() && !row.fields[*units].empty()) {
                auto sc = length_scale(row.fields[*units]);
                if (!sc) row_error(t, row, "unknown length unit '" + row.fields[*units] + "'");
                scale = *sc;
            }
            s.length_m = number(t, row, len) * scale;
            if (!(s.length_m > 0.0)) row_error(t, row, "segment length must be positive");
            if (s.from_bus == s.to_bus) row_error(t, row, "segment connects a bus to itself");
            auto c = code_index.find(field(t, row, code));
            if (c == code_index.end()) {
                row_error(t, row, "unknown line code '" + field(t, row, code) + "'", ErrorKind::DanglingReference);
            }
            s.code = c->second;
            segments.push_back(std::move(s));
        }
    }

    // Loads
    std::vector<LoadPoint> loads;
    {
        const Table t = read_table(directory / "Loads.csv");
        const auto name = t.require_column("Name"), bus = t.require_column("Bus");
        const auto phases = t.require_column("phases"), kw = t.require_column("kW");
        const auto pf = t.column("PF"), nph = t.column("numPhases");
        for (const auto& row : t.rows) {
            if (nph && number(t, row, *nph) != 1.0) row_error(t, row, "only single-phase loads are supported");
            auto it = bus_index.find(field(t, row, bus));
            if (it == bus_index.end()) {
                row_error(t, row, "unknown bus '" + field(t, row, bus) + "'", ErrorKind::DanglingReference);
            }
            auto ph = parse_phase(field(t, row, phases));
            if (!ph) row_error(t, row, "unknown phase '" + field(t, row, phases) + "'");
            const double p = number(t, row, kw);
            if (p < 0.0) row_error(t, row, "load kW must be >= 0");
            const double factor = number_or(t, row, pf, 1.0);
            if (!(factor > 0.0 && factor <= 1.0)) row_error(t, row, "power factor outside (0, 1]");
            loads.push_back({field(t, row, name), it->second, *ph, p, factor});
        }
    }

    // Source
    SourceSpec source;
    std::string source_bus = first_from;
    if (fs::exists(directory / "Source.csv")) {
        const Table t = read_table(directory / "Source.csv");
        if (t.rows.size() != 1) fail(ErrorKind::ParseError, t.file + ": expected exactly one source row");
        const auto& row = t.rows.front();
        source_bus = field(t, row, t.require_column("Bus"));
        source.base_kv_ll = number_or(t, row, t.column("BasekV"), source.base_kv_ll);
        const std::array<const char*, 3> pu{"pu_a", "pu_b", "pu_c"}, ang{"Angle_a", "Angle_b", "Angle_c"};
        for (int p = 0; p < 3; ++p) {
            source.voltage_pu[p] = number_or(t, row, t.column(pu[p]), number_or(t, row, t.column("pu"), 1.05));
            source.angle_deg[p] = number_or(t, row, t.column(ang[p]), source.angle_deg[p]);
            if (source.voltage_pu[p] < 0.9 || source.voltage_pu[p] > 1.1) {
                row_error(t, row, "source voltage must lie in [0.9, 1.1] p.u.");
            }
        }
        const Complex z1{number_or(t, row, t.column("R1"), 0.0), number_or(t, row, t.column("X1"), 0.0)};
        const Complex z0{number_or(t, row, t.column("R0"), 0.0), number_or(t, row, t.column("X0"), 0.0)};
        source.impedance_ohm = sequence_to_phase(z1, z0);
    }
    auto sb = bus_index.find(source_bus);
    if (sb == bus_index.end()) fail(ErrorKind::DanglingReference, "source bus '" + source_bus + "' is unknown");
    source.bus = sb->second;

    return FeederModel(std::move(buses), std::move(codes), std::move(segments), std::move(loads), std::move(source));
}

// ---------------------------------------------------------------------------
// Canonical JSON

constexpr std::string_view feeder_schema = "unbalance-lab/feeder";
constexpr int feeder_schema_version = 1;

inline nlohmann::ordered_json to_json(const FeederModel& m) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["schema"] = feeder_schema;
    j["version"] = feeder_schema_version;
    const SourceSpec& s = m.source();
    ordered_json re = ordered_json::array(), im = ordered_json::array();
    for (int r = 0; r < 3; ++r) {
        ordered_json rr = ordered_json::array(), ii = ordered_json::array();
        for (int c = 0; c < 3; ++c) {
            rr.push_back(s.impedance_ohm(r, c).real());
            ii.push_back(s.impedance_ohm(r, c).imag());
        }
        re.push_back(rr);
        im.push_back(ii);
    }
    j["source"] = {{"bus", m.bus_id(s.bus)},
                   {"base_kv_ll", s.base_kv_ll},
                   {"voltage_pu", s.voltage_pu},
                   {"angle_deg", s.angle_deg},
                   {"impedance_ohm", {{"re", re}, {"im", im}}}};
    j["line_codes"] = ordered_json::array();
    for (const auto& c : m.line_codes()) {
        j["line_codes"].push_back({{"name", c.name},
                                   {"r1_ohm_per_km", c.r1_ohm_per_km},
                                   {"x1_ohm_per_km", c.x1_ohm_per_km},
                                   {"r0_ohm_per_km", c.r0_ohm_per_km},
                                   {"x0_ohm_per_km", c.x0_ohm_per_km},
                                   {"c1_nf_per_km", c.c1_nf_per_km},
                                   {"c0_nf_per_km", c.c0_nf_per_km}});
    }
    j["buses"] = ordered_json::array();
    for (const auto& b : m.buses()) {
        ordered_json jb{{"id", b.id}};
        if (b.xy) {
            jb["x"] = (*b.xy)[0];
            jb["y"] = (*b.xy)[1];
        }
        j["buses"].push_back(jb);
    }
    j["segments"] = ordered_json::array();
    for (const auto& seg : m.segments()) {
        j["segments"].push_back({{"name", seg.name},
                                 {"from", m.bus_id(seg.from_bus)},
                                 {"to", m.bus_id(seg.to_bus)},
                                 {"length_m", seg.length_m},
                                 {"code", m.line_codes()[seg.code].name}});
    }
    j["loads"] = ordered_json::array();
    for (const auto& l : m.loads()) {
        j["loads"].push_back({{"name", l.name},
                              {"bus", m.bus_id(l.bus)},
                              {"phase", std::string(1, phase_letter(l.phase))},
                              {"kw", l.kw},
                              {"power_factor", l.power_factor}});
    }
    j["pv_units"] = ordered_json::array();
    for (const auto& p : m.pv_units()) {
        j["pv_units"].push_back({{"bus", m.bus_id(p.bus)}, {"phase", std::string(1, phase_letter(p.phase))}, {"kw", p.kw}});
    }
    return j;
}

inline FeederModel feeder_from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema").get<std::string>() != feeder_schema) {
            fail(ErrorKind::ParseError, "not a feeder document (schema field)");
        }
        if (j.at("version").get<int>() != feeder_schema_version) {
            fail(ErrorKind::ParseError, "unsupported feeder schema version");
        }
        std::vector<Bus> buses;
        std::unordered_map<std::string, std::size_t> index;
        for (const auto& jb : j.at("buses")) {
            Bus b{jb.at("id").get<std::string>(), std::nullopt};
            if (jb.contains("x")) b.xy = std::array<double, 2>{jb.at("x").get<double>(), jb.at("y").get<double>()};
            index.emplace(b.id, buses.size());
            buses.push_back(std::move(b));
        }
        auto bus = [&](const nlohmann::json& v) {
            auto it = index.find(v.get<std::string>());
            if (it == index.end()) fail(ErrorKind::DanglingReference, "unknown bus '" + v.get<std::string>() + "'");
            return it->second;
        };
        auto phase = [](const nlohmann::json& v) {
            auto p = detail::parse_phase(v.get<std::string>());
            if (!p) fail(ErrorKind::ParseError, "unknown phase '" + v.get<std::string>() + "'");
            return *p;
        };
        std::vector<LineCode> codes;
        std::unordered_map<std::string, std::size_t> code_index;
        for (const auto& jc : j.at("line_codes")) {
            LineCode c{jc.at("name").get<std::string>(),  jc.at("r1_ohm_per_km").get<double>(),
                       jc.at("x1_ohm_per_km").get<double>(), jc.at("r0_ohm_per_km").get<double>(),
                       jc.at("x0_ohm_per_km").get<double>(), jc.value("c1_nf_per_km", 0.0),
                       jc.value("c0_nf_per_km", 0.0)};
            code_index.emplace(c.name, codes.size());
            codes.push_back(std::move(c));
        }
        std::vector<LineSegment> segments;
        for (const auto& js : j.at("segments")) {
            auto c = code_index.find(js.at("code").get<std::string>());
            if (c == code_index.end()) fail(ErrorKind::DanglingReference, "unknown line code " + js.at("code").dump());
            segments.push_back({js.value("name", std::string{}), bus(js.at("from")), bus(js.at("to")),
                                js.at("length_m").get<double>(), c->second});
        }
        std::vector<LoadPoint> loads;
        for (const auto& jl : j.at("loads")) {
            loads.push_back({jl.value("name", std::string{}), bus(jl.at("bus")), phase(jl.at("phase")),
                             jl.at("kw").get<double>(), jl.value("power_factor", 1.0)});
        }
        std::vector<PvUnit> pv;
        if (j.contains("pv_units")) {
            for (const auto& jp : j.at("pv_units")) pv.push_back({bus(jp.at("bus")), phase(jp.at("phase")), jp.at("kw").get<double>()});
        }
        SourceSpec source;
        const auto& js = j.at("source");
        source.bus = bus(js.at("bus"));
        source.base_kv_ll = js.value("base_kv_ll", source.base_kv_ll);
        if (js.contains("voltage_pu")) source.voltage_pu = js.at("voltage_pu").get<std::array<double, 3>>();
        if (js.contains("angle_deg")) source.angle_deg = js.at("angle_deg").get<std::array<double, 3>>();
        if (js.contains("impedance_ohm")) {
            const auto& z = js.at("impedance_ohm");
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) {
                    source.impedance_ohm(r, c) = {z.at("re").at(r).at(c).get<double>(), z.at("im").at(r).at(c).get<double>()};
                }
            }
        }
        return FeederModel(std::move(buses), std::move(codes), std::move(segments), std::move(loads), std::move(source),
                           std::move(pv));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ParseError, std::string("feeder JSON: ") + e.what());
    }
}

inline FeederModel load_feeder_json(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) fail(ErrorKind::ParseError, "cannot open " + file.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ParseError, file.string() + ": " + e.what());
    }
    return feeder_from_json(j);
}

/// A directory of delimited files or a canonical JSON document.
inline FeederModel load_model(const std::filesystem::path& path) {
    if (std::filesystem::is_directory(path)) return load_feeder(path);
    return load_feeder_json(path);
}

}  // namespace unbalance
