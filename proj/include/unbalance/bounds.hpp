#pragma once

// Numerical bounds of index/VUF over a box of phase magnitudes and angle
// deviations, restricted to samples whose VUF lies in a band.
//
// The search space is five-dimensional: the three magnitudes plus the
// deviations of phases b and c from -120/+120 degrees. Phase a stays at 0
// since every index is rotation invariant.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "unbalance/error.hpp"
#include "unbalance/metrics.hpp"
#include "unbalance/parallel.hpp"
#include "unbalance/phasor.hpp"

namespace unbalance {

struct EnvelopeBox {
    double mag_lo = 0.94;
    double mag_hi = 1.1;
    double angle_dev = 5.0;  ///< symmetric deviation from nominal, degrees

    void validate() const {
        require(std::isfinite(mag_lo) && std::isfinite(mag_hi) && 0.0 < mag_lo && mag_lo <= mag_hi,
                "envelope requires 0 < mag_lo <= mag_hi");
        require(std::isfinite(angle_dev) && angle_dev >= 0.0, "envelope requires angle_dev >= 0");
    }
};

/// Closed VUF interval in percent.
struct VufBand {
    double lo = 1.0;
    double hi = 2.0;

    bool contains(double vuf) const { return vuf >= lo && vuf <= hi; }
    friend bool operator==(const VufBand&, const VufBand&) = default;
};

struct BoundsQuery {
    IndexKind index = IndexKind::LVUR;
    VufBand band;
    EnvelopeBox box;
    int resolution = 25;
    bool refine = true;

    void validate() const {
        require(index != IndexKind::VUF, "bounds are taken relative to VUF; pick another index");
        require(std::isfinite(band.lo) && std::isfinite(band.hi) && 0.0 <= band.lo && band.lo < band.hi,
                "VUF band requires 0 <= lo < hi");
        require(resolution >= 2, "resolution must be at least 2 points per dimension");
        box.validate();
    }
};

struct BoundsResult {
    IndexKind index;
    VufBand band;
    double lower;
    double upper;
    PhasorTriple arg_lower;
    PhasorTriple arg_upper;
    std::size_t samples_in_band;
};

enum class Direction { Min, Max };

/// Coordinates of one point of the search space: magnitudes a, b, c then
/// the angle deviations of phases b and c.
using EnvelopePoint = std::array<double, 5>;

inline PhasorTriple to_triple(const EnvelopePoint& x) {
    return {Phasor(x[0], 0.0), Phasor(x[1], -120.0 + x[3]), Phasor(x[2], 120.0 + x[4])};
}

/// Inverse of to_triple after rotating phase a onto 0 degrees.
inline EnvelopePoint to_point(const PhasorTriple& v) {
    const double ref = v.a().angle_deg();
    return {v.a().magnitude(), v.b().magnitude(), v.c().magnitude(),
            normalize_degrees(v.b().angle_deg() - ref + 120.0), normalize_degrees(v.c().angle_deg() - ref - 120.0)};
}

inline bool inside(const EnvelopeBox& box, const EnvelopePoint& x, double tol = 1e-9) {
    for (int i = 0; i < 3; ++i) {
        if (x[i] < box.mag_lo - tol || x[i] > box.mag_hi + tol) return false;
    }
    return std::abs(x[3]) <= box.angle_dev + tol && std::abs(x[4]) <= box.angle_dev + tol;
}

namespace detail {

inline double index_value(IndexKind k, const PhaseArray& v) {
    switch (k) {
        case IndexKind::VUF: return vuf_value(v);
        case IndexKind::LVUR: return lvur_value(line_magnitudes(v));
        case IndexKind::CIGRE: return cigre_value(line_magnitudes(v));
        case IndexKind::PVUR1: return pvur1_value({std::abs(v[0]), std::abs(v[1]), std::abs(v[2])});
        case IndexKind::PVUR2: return pvur2_value({std::abs(v[0]), std::abs(v[1]), std::abs(v[2])});
    }
    return 0.0;
}

/// VUF and index/VUF at a point, or nullopt when VUF is zero or undefined.
struct RatioSample {
    double vuf;
    double ratio;
};

inline std::optional<RatioSample> ratio_at(IndexKind k, const EnvelopePoint& x) {
    const PhaseArray v = to_triple(x).values();
    const SequenceSet s = sequence_of(v);
    const double pos = std::abs(s.positive);
    if (!(pos > positive_sequence_floor * std::max({x[0], x[1], x[2]}))) return std::nullopt;
    const double u = 100.0 * std::abs(s.negative) / pos;
    if (!(u > 0.0)) return std::nullopt;
    return RatioSample{u, index_value(k, v) / u};
}

struct Extremum {
    double ratio = 0.0;
    EnvelopePoint arg{};
    bool valid = false;
};

// Strictly better ratio wins; equal ratios keep the lexicographically
// smaller argument so the result does not depend on traversal order.
inline void offer(Extremum& e, double ratio, const EnvelopePoint& arg, Direction dir) {
    const bool better = !e.valid || (dir == Direction::Min ? ratio < e.ratio : ratio > e.ratio) ||
                        (ratio == e.ratio && arg < e.arg);
    if (better) {
        e = {ratio, arg, true};
    }
}

inline void merge(Extremum& into, const Extremum& from, Direction dir) {
    if (from.valid) offer(into, from.ratio, from.arg, dir);
}

struct Cell {
    Extremum lower;
    Extremum upper;
    std::size_t count = 0;
};

/// Per band, per relative index, in relative_indices order.
using SweepTable = std::vector<std::array<Cell, 4>>;

inline std::vector<double> linspace(double lo, double hi, int n) {
    if (lo == hi) return {lo};
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return out;
}

inline SweepTable sweep_grid(std::span<const VufBand> bands, const EnvelopeBox& box, int resolution) {
    const auto mags = linspace(box.mag_lo, box.mag_hi, resolution);
    const auto devs = linspace(-box.angle_dev, box.angle_dev, resolution);
    std::vector<Complex> rot_b, rot_c;
    for (double d : devs) {
        rot_b.push_back(cis_degrees(-120.0 + d));
        rot_c.push_back(cis_degrees(120.0 + d));
    }

    std::vector<SweepTable> partial(mags.size(), SweepTable(bands.size()));
    parallel_for(mags.size(), [&](std::size_t ia) {
        SweepTable& table = partial[ia];
        const double ma = mags[ia];
        for (double mb : mags) {
            for (double mc : mags) {
                for (std::size_t jb = 0; jb < devs.size(); ++jb) {
                    for (std::size_t jc = 0; jc < devs.size(); ++jc) {
                        const PhaseArray v{Complex(ma, 0.0), mb * rot_b[jb], mc * rot_c[jc]};
                        const SequenceSet s = sequence_of(v);
                        const double pos = std::abs(s.positive);
                        if (!(pos > positive_sequence_floor * std::max({ma, mb, mc}))) continue;
                        const double u = 100.0 * std::abs(s.negative) / pos;
                        if (!(u > 0.0)) continue;

                        bool evaluated = false;
                        std::array<double, 4> ratio{};
                        const EnvelopePoint arg{ma, mb, mc, devs[jb], devs[jc]};
                        for (std::size_t b = 0; b < bands.size(); ++b) {
                            if (!bands[b].contains(u)) continue;
                            if (!evaluated) {
                                const auto lines = line_magnitudes(v);
                                const std::array<double, 3> m{ma, mb, mc};
                                ratio = {lvur_value(lines) / u, cigre_value(lines) / u, pvur1_value(m) / u,
                                         pvur2_value(m) / u};
                                evaluated = true;
                            }
                            for (std::size_t k = 0; k < 4; ++k) {
                                Cell& cell = table[b][k];
                                ++cell.count;
                                offer(cell.lower, ratio[k], arg, Direction::Min);
                                offer(cell.upper, ratio[k], arg, Direction::Max);
                            }
                        }
                    }
                }
            }
        }
    });

    SweepTable total(bands.size());
    for (const SweepTable& table : partial) {
        for (std::size_t b = 0; b < bands.size(); ++b) {
            for (std::size_t k = 0; k < 4; ++k) {
                total[b][k].count += table[b][k].count;
                merge(total[b][k].lower, table[b][k].lower, Direction::Min);
                merge(total[b][k].upper, table[b][k].upper, Direction::Max);
            }
        }
    }
    return total;
}

inline std::size_t relative_slot(IndexKind k) {
    for (std::size_t i = 0; i < relative_indices.size(); ++i) {
        if (relative_indices[i] == k) return i;
    }
    fail(ErrorKind::InvalidArgument, "VUF has no relative slot");
}

inline double vuf_at(const EnvelopePoint& x) {
    const PhaseArray v = to_triple(x).values();
    const SequenceSet s = sequence_of(v);
    return 100.0 * std::abs(s.negative) / std::abs(s.positive);
}

/// Pulls a point that left the VUF band back onto the nearest band edge by a
/// line search along the VUF gradient restricted to `free` coordinates.
inline std::optional<EnvelopePoint> restore_to_band(const EnvelopePoint& y, const VufBand& band,
                                                    const std::array<double, 5>& lo, const std::array<double, 5>& hi,
                                                    const std::array<bool, 5>& free) {
    const double u = vuf_at(y);
    if (!std::isfinite(u)) return std::nullopt;
    if (band.contains(u)) return y;
    const double target = u < band.lo ? band.lo : band.hi;
    const double sign = u < band.lo ? 1.0 : -1.0;

    std::array<double, 5> d{};
    double norm = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
        if (!free[i] || hi[i] == lo[i]) continue;
        const double h = 1e-7 * (hi[i] - lo[i]);
        EnvelopePoint a = y, b = y;
        a[i] = std::max(lo[i], y[i] - h);
        b[i] = std::min(hi[i], y[i] + h);
        const double g = (vuf_at(b) - vuf_at(a)) / (b[i] - a[i]) * (hi[i] - lo[i]);
        if (!std::isfinite(g)) return std::nullopt;
        d[i] = sign * g * (hi[i] - lo[i]);
        if ((d[i] > 0.0 && y[i] >= hi[i]) || (d[i] < 0.0 && y[i] <= lo[i])) d[i] = 0.0;
        norm += (d[i] / (hi[i] - lo[i])) * (d[i] / (hi[i] - lo[i]));
    }
    if (!(norm > 0.0)) return std::nullopt;
    norm = std::sqrt(norm);
    for (double& x : d) x /= norm;

    auto at = [&](double t) {
        EnvelopePoint z = y;
        for (std::size_t i = 0; i < 5; ++i) z[i] = std::clamp(y[i] + t * d[i], lo[i], hi[i]);
        return z;
    };
    auto crossed = [&](double t) { return sign * (vuf_at(at(t)) - target) >= 0.0; };

    double a = 0.0, b = 1e-9;
    while (!crossed(b)) {
        a = b;
        b *= 2.0;
        if (b > 4.0) return std::nullopt;
    }
    for (int it = 0; it < 80 && b - a > 1e-15; ++it) {
        const double m = 0.5 * (a + b);
        (crossed(m) ? b : a) = m;
    }
    const EnvelopePoint z = at(b);
    if (!band.contains(vuf_at(z))) return std::nullopt;
    return z;
}

inline EnvelopePoint refine_point(const EnvelopePoint& start, const BoundsQuery& q, Direction dir) {
    const auto here = ratio_at(q.index, start);
    if (!here || !q.band.contains(here->vuf)) return start;

    const double mag_span = q.box.mag_hi - q.box.mag_lo;
    const double ang_span = 2.0 * q.box.angle_dev;
    const double cells = static_cast<double>(q.resolution - 1);
    const std::array<double, 5> lo{q.box.mag_lo, q.box.mag_lo, q.box.mag_lo, -q.box.angle_dev, -q.box.angle_dev};
    const std::array<double, 5> hi{q.box.mag_hi, q.box.mag_hi, q.box.mag_hi, q.box.angle_dev, q.box.angle_dev};
    std::array<double, 5> step{mag_span / cells, mag_span / cells, mag_span / cells, ang_span / cells,
                               ang_span / cells};
    const std::array<double, 5> min_step{mag_span * 1e-12, mag_span * 1e-12, mag_span * 1e-12, ang_span * 1e-12,
                                         ang_span * 1e-12};
    const double sign = dir == Direction::Max ? 1.0 : -1.0;

    // Poll every direction in {-1, 0, 1}^5 so that moves along the VUF band
    // boundary, which need several coordinates to change together, are found.
    std::vector<std::array<double, 5>> directions;
    for (int code = 0; code < 243; ++code) {
        std::array<double, 5> d{};
        int c = code;
        for (std::size_t i = 0; i < 5; ++i, c /= 3) d[i] = static_cast<double>(c % 3) - 1.0;
        if (d != std::array<double, 5>{}) directions.push_back(d);
    }
    std::stable_sort(directions.begin(), directions.end(), [](const auto& a, const auto& b) {
        auto nz = [](const auto& d) { return std::count_if(d.begin(), d.end(), [](double v) { return v != 0.0; }); };
        return nz(a) < nz(b);
    });

    constexpr std::array<bool, 5> angles_only{false, false, false, true, true};
    constexpr std::array<bool, 5> everything{true, true, true, true, true};

    EnvelopePoint x = start;
    double best = sign * here->ratio;
    constexpr int max_evaluations = 1000000;
    int evaluations = 0;
    while (evaluations < max_evaluations) {
        bool improved = false;
        for (const auto& d : directions) {
            EnvelopePoint y = x;
            bool moved = false;
            for (std::size_t i = 0; i < 5; ++i) {
                if (d[i] == 0.0 || step[i] <= min_step[i]) continue;
                y[i] = std::clamp(x[i] + d[i] * step[i], lo[i], hi[i]);
                moved = moved || y[i] != x[i];
            }
            if (!moved) continue;
            ++evaluations;
            auto r = ratio_at(q.index, y);
            if (r && !q.band.contains(r->vuf)) {
                auto back = restore_to_band(y, q.band, lo, hi, angles_only);
                if (!back) back = restore_to_band(y, q.band, lo, hi, everything);
                evaluations += 20;
                r = std::nullopt;
                if (back) {
                    y = *back;
                    r = ratio_at(q.index, y);
                }
            }
            if (r && q.band.contains(r->vuf) && sign * r->ratio > best) {
                x = y;
                best = sign * r->ratio;
                improved = true;
            }
        }
        if (!improved) {
            bool active = false;
            for (std::size_t i = 0; i < 5; ++i) {
                step[i] *= 0.5;
                active = active || step[i] > min_step[i];
            }
            if (!active) break;
        }
    }
    return x;
}

}  // namespace detail

/// index/VUF for a triple, the quantity bounded by the sweep.
inline double ratio_to_vuf(IndexKind k, const PhasorTriple& v) {
    return detail::index_value(k, v.values()) / vuf(v).value;
}

/// Derivative-free polish of a grid extremum. Pattern search over all
/// {-1, 0, 1} combinations of the five coordinates with box projection and
/// steps halving from one grid cell down to 1e-12 of the box width. A poll
/// point outside the VUF band is pulled back onto the band edge by a line
/// search along the VUF gradient, and rejected if that fails. Never returns
/// a worse point than `start`.
inline PhasorTriple refine_extremum(const PhasorTriple& start, const BoundsQuery& q, Direction dir) {
    q.validate();
    return to_triple(detail::refine_point(to_point(start), q, dir));
}

namespace detail {

inline BoundsResult finish(const Cell& cell, const BoundsQuery& q) {
    if (cell.count == 0) {
        fail(ErrorKind::EmptyBand, "no grid sample has VUF in [" + std::to_string(q.band.lo) + ", " +
                                       std::to_string(q.band.hi) + "]; raise the resolution or widen the band");
    }
    EnvelopePoint lo = cell.lower.arg;
    EnvelopePoint hi = cell.upper.arg;
    double lower = cell.lower.ratio;
    double upper = cell.upper.ratio;
    if (q.refine) {
        lo = refine_point(lo, q, Direction::Min);
        hi = refine_point(hi, q, Direction::Max);
        lower = std::min(lower, ratio_at(q.index, lo)->ratio);
        upper = std::max(upper, ratio_at(q.index, hi)->ratio);
    }
    return {q.index, q.band, lower, upper, to_triple(lo), to_triple(hi), cell.count};
}

}  // namespace detail

/// Grid enumeration of index/VUF over the box, optionally polished by
/// refine_extremum. Throws EmptyBand when no grid point lands in the band.
inline BoundsResult sweep_ratio_bounds(const BoundsQuery& q) {
    q.validate();
    const std::array<VufBand, 1> bands{q.band};
    const auto table = detail::sweep_grid(bands, q.box, q.resolution);
    return detail::finish(table[0][detail::relative_slot(q.index)], q);
}

struct BandCell {
    IndexKind index;
    VufBand band;
    std::optional<BoundsResult> result;
    std::string error;  ///< set when result is empty
};

/// One cell per (band, relative index), bands outermost. A single grid pass
/// serves every cell.
inline std::vector<BandCell> band_report(std::span<const VufBand> bands, const EnvelopeBox& box, int resolution,
                                         bool refine = true) {
    std::vector<VufBand> sorted(bands.begin(), bands.end());
    std::sort(sorted.begin(), sorted.end(), [](const VufBand& a, const VufBand& b) { return a.lo < b.lo; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        require(sorted[i].lo >= sorted[i - 1].hi, "VUF bands must not overlap");
    }
    for (const VufBand& b : bands) {
        BoundsQuery{IndexKind::LVUR, b, box, resolution, refine}.validate();
    }

    const auto table = detail::sweep_grid(bands, box, resolution);
    std::vector<BandCell> out;
    for (std::size_t b = 0; b < bands.size(); ++b) {
        for (std::size_t k = 0; k < relative_indices.size(); ++k) {
            const BoundsQuery q{relative_indices[k], bands[b], box, resolution, refine};
            BandCell cell{q.index, q.band, std::nullopt, {}};
            try {
                cell.result = detail::finish(table[b][k], q);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::EmptyBand) throw;
                cell.error = e.what();
            }
            out.push_back(std::move(cell));
        }
    }
    return out;
}

}  // namespace unbalance
