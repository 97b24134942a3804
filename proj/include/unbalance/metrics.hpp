#pragma once

// Voltage unbalance indices.
//
// VUF   negative / positive sequence magnitude (IEC "true" definition)
// LVUR  max line-voltage deviation from the average (NEMA)
// CIGRE closed form on line-voltage magnitudes; algebraically equal to VUF
// PVUR1 max phase-voltage deviation from the average (IEEE 141)
// PVUR2 phase-voltage range over the average (IEEE 112/936)
//
// All values are in percent. Inputs are phase-to-neutral phasors; the
// sequence ratio is the same for line phasors, so VUF is insensitive to
// that convention.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "unbalance/error.hpp"
#include "unbalance/phasor.hpp"

namespace unbalance {

enum class IndexKind { VUF, LVUR, CIGRE, PVUR1, PVUR2 };

constexpr std::array<IndexKind, 5> all_indices{IndexKind::VUF, IndexKind::LVUR, IndexKind::CIGRE,
                                               IndexKind::PVUR1, IndexKind::PVUR2};
/// The indices compared against VUF.
constexpr std::array<IndexKind, 4> relative_indices{IndexKind::LVUR, IndexKind::CIGRE, IndexKind::PVUR1,
                                                    IndexKind::PVUR2};

constexpr std::string_view to_string(IndexKind k) {
    switch (k) {
        case IndexKind::VUF: return "VUF";
        case IndexKind::LVUR: return "LVUR";
        case IndexKind::CIGRE: return "CIGRE";
        case IndexKind::PVUR1: return "PVUR1";
        case IndexKind::PVUR2: return "PVUR2";
    }
    return "?";
}

inline std::optional<IndexKind> parse_index_kind(std::string_view s) {
    for (IndexKind k : all_indices) {
        if (s == to_string(k)) return k;
    }
    return std::nullopt;
}

struct Intermediate {
    std::string name;
    double value;

    friend bool operator==(const Intermediate&, const Intermediate&) = default;
};

/// An index value together with the quantities that produced it.
struct MetricDetail {
    IndexKind kind;
    double value;
    std::vector<Intermediate> intermediates;

    double intermediate(std::string_view name) const {
        for (const auto& i : intermediates) {
            if (i.name == name) return i.value;
        }
        fail(ErrorKind::InvalidArgument, "no intermediate named " + std::string(name));
    }

    friend bool operator==(const MetricDetail&, const MetricDetail&) = default;
};

namespace detail {

constexpr double positive_sequence_floor = 1e-12;
constexpr double degenerate_line_floor = 1e-12;
constexpr double cigre_clamp_window = 1e-12;
/// Relative size below which a deviation from balance is transform round-off
/// and is reported as exactly zero.
constexpr double round_off_floor = 64.0 * std::numeric_limits<double>::epsilon();

inline SequenceSet sequence_of(const PhaseArray& v) {
    return {
        (v[0] + v[1] + v[2]) / 3.0,
        (v[0] + rotation_a * v[1] + rotation_a2 * v[2]) / 3.0,
        (v[0] + rotation_a2 * v[1] + rotation_a * v[2]) / 3.0,
    };
}

inline std::array<double, 3> line_magnitudes(const PhaseArray& v) {
    return {std::abs(v[0] - v[1]), std::abs(v[1] - v[2]), std::abs(v[2] - v[0])};
}

struct AverageDeviation {
    double average;
    double max_deviation;
};

inline AverageDeviation average_deviation(const std::array<double, 3>& m) {
    const double avg = (m[0] + m[1] + m[2]) / 3.0;
    const double dev = std::max({std::abs(m[0] - avg), std::abs(m[1] - avg), std::abs(m[2] - avg)});
    return {avg, dev <= round_off_floor * avg ? 0.0 : dev};
}

struct CigreTerms {
    double beta;
    double excess;    // 6*beta - 2
    double radicand;  // 3 - 6*beta
};

// 6β-2 expanded as 2·Σ(Vi²-Vj²)² / (ΣV²)² so that near-balanced inputs do
// not lose digits to cancellation.
inline CigreTerms cigre_terms(const std::array<double, 3>& l) {
    const double s0 = l[0] * l[0], s1 = l[1] * l[1], s2 = l[2] * l[2];
    const double sum2 = s0 + s1 + s2;
    const double beta = (s0 * s0 + s1 * s1 + s2 * s2) / (sum2 * sum2);
    const double d01 = (l[0] - l[1]) * (l[0] + l[1]);
    const double d12 = (l[1] - l[2]) * (l[1] + l[2]);
    const double d20 = (l[2] - l[0]) * (l[2] + l[0]);
    double excess = 2.0 * (d01 * d01 + d12 * d12 + d20 * d20) / (sum2 * sum2);
    if (excess <= round_off_floor * round_off_floor) excess = 0.0;
    return {beta, excess, 1.0 - excess};
}

inline double cigre_from_terms(double excess, double radicand) {
    return 100.0 * std::sqrt(excess) / (1.0 + std::sqrt(std::max(radicand, 0.0)));
}

inline double negative_magnitude(const SequenceSet& s, double scale) {
    const double neg = std::abs(s.negative);
    return neg <= round_off_floor * scale ? 0.0 : neg;
}

inline double vuf_value(const PhaseArray& v) {
    const SequenceSet s = sequence_of(v);
    const double scale = std::max({std::abs(v[0]), std::abs(v[1]), std::abs(v[2])});
    return 100.0 * negative_magnitude(s, scale) / std::abs(s.positive);
}

inline double lvur_value(const std::array<double, 3>& l) {
    const auto [avg, dev] = average_deviation(l);
    return 100.0 * dev / avg;
}

inline double cigre_value(const std::array<double, 3>& l) {
    const CigreTerms t = cigre_terms(l);
    return cigre_from_terms(t.excess, t.radicand);
}

inline double pvur1_value(const std::array<double, 3>& m) {
    const auto [avg, dev] = average_deviation(m);
    return 100.0 * dev / avg;
}

inline double pvur2_value(const std::array<double, 3>& m) {
    const double avg = (m[0] + m[1] + m[2]) / 3.0;
    return 100.0 * (std::max({m[0], m[1], m[2]}) - std::min({m[0], m[1], m[2]})) / avg;
}

}  // namespace detail

inline SequenceSet symmetrical_components(const PhasorTriple& v) {
    return detail::sequence_of(v.values());
}

/// Inverse Fortescue transform.
inline PhaseArray phase_values(const SequenceSet& s) {
    return {
        s.zero + s.positive + s.negative,
        s.zero + rotation_a2 * s.positive + rotation_a * s.negative,
        s.zero + rotation_a * s.positive + rotation_a2 * s.negative,
    };
}

inline MetricDetail vuf(const PhasorTriple& v) {
    const SequenceSet s = symmetrical_components(v);
    const double pos = std::abs(s.positive);
    const double neg = detail::negative_magnitude(s, v.max_magnitude());
    if (pos < detail::positive_sequence_floor * v.max_magnitude()) {
        fail(ErrorKind::PositiveSequenceZero, "positive-sequence component vanishes");
    }
    return {IndexKind::VUF, 100.0 * neg / pos, {{"positive_magnitude", pos}, {"negative_magnitude", neg}}};
}

inline LineVoltageTriple line_voltages(const PhasorTriple& v) {
    const auto l = detail::line_magnitudes(v.values());
    if (l[0] < detail::degenerate_line_floor && l[1] < detail::degenerate_line_floor &&
        l[2] < detail::degenerate_line_floor) {
        fail(ErrorKind::DegenerateTriple, "all phase voltages coincide; line voltages vanish");
    }
    return {l[0], l[1], l[2]};
}

inline MetricDetail lvur(const LineVoltageTriple& lv) {
    const auto [avg, dev] = detail::average_deviation(lv.values());
    return {IndexKind::LVUR, 100.0 * dev / avg, {{"average", avg}, {"max_deviation", dev}}};
}

inline MetricDetail cigre_factor(const LineVoltageTriple& lv) {
    const auto t = detail::cigre_terms(lv.values());
    if (t.radicand < -detail::cigre_clamp_window) {
        fail(ErrorKind::NotRealizable, "line magnitudes cannot form a phasor triangle (3-6*beta = " +
                                           std::to_string(t.radicand) + ")");
    }
    const double radicand = std::max(t.radicand, 0.0);
    const double excess = t.radicand < 0.0 ? 1.0 : t.excess;
    return {IndexKind::CIGRE,
            detail::cigre_from_terms(excess, radicand),
            {{"beta", t.beta}, {"radicand", radicand}, {"excess", excess}}};
}

inline MetricDetail pvur1(const PhasorTriple& v) {
    const auto [avg, dev] = detail::average_deviation(v.magnitudes());
    return {IndexKind::PVUR1, 100.0 * dev / avg, {{"average", avg}, {"max_deviation", dev}}};
}

inline MetricDetail pvur2(const PhasorTriple& v) {
    const auto m = v.magnitudes();
    const double avg = (m[0] + m[1] + m[2]) / 3.0;
    const double hi = std::max({m[0], m[1], m[2]});
    const double lo = std::min({m[0], m[1], m[2]});
    return {IndexKind::PVUR2, 100.0 * (hi - lo) / avg, {{"max", hi}, {"min", lo}, {"average", avg}}};
}

inline double absolute_error(double index_value, double vuf_value) {
    require(std::isfinite(index_value) && std::isfinite(vuf_value) && index_value >= 0.0 && vuf_value >= 0.0,
            "absolute_error expects finite nonnegative percentages");
    return std::abs(index_value - vuf_value);
}

/// Re-evaluates the defining formula of `m.kind` from its stored intermediates.
inline double recompute(const MetricDetail& m) {
    switch (m.kind) {
        case IndexKind::VUF:
            return 100.0 * m.intermediate("negative_magnitude") / m.intermediate("positive_magnitude");
        case IndexKind::LVUR:
        case IndexKind::PVUR1:
            return 100.0 * m.intermediate("max_deviation") / m.intermediate("average");
        case IndexKind::CIGRE:
            return detail::cigre_from_terms(m.intermediate("excess"), m.intermediate("radicand"));
        case IndexKind::PVUR2:
            return 100.0 * (m.intermediate("max") - m.intermediate("min")) / m.intermediate("average");
    }
    return 0.0;
}

/// All five indices of one phasor triple.
struct IndexSet {
    MetricDetail vuf;
    MetricDetail lvur;
    MetricDetail cigre;
    MetricDetail pvur1;
    MetricDetail pvur2;

    const MetricDetail& operator[](IndexKind k) const {
        switch (k) {
            case IndexKind::VUF: return vuf;
            case IndexKind::LVUR: return lvur;
            case IndexKind::CIGRE: return cigre;
            case IndexKind::PVUR1: return pvur1;
            case IndexKind::PVUR2: return pvur2;
        }
        return vuf;
    }

    friend bool operator==(const IndexSet&, const IndexSet&) = default;
};

inline IndexSet compute_all(const PhasorTriple& v) {
    const LineVoltageTriple lv = line_voltages(v);
    return {vuf(v), lvur(lv), cigre_factor(lv), pvur1(v), pvur2(v)};
}

}  // namespace unbalance
