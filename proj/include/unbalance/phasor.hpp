#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>

#include "unbalance/error.hpp"

namespace unbalance {

using Complex = std::complex<double>;
using PhaseArray = std::array<Complex, 3>;

enum class Phase { A = 0, B = 1, C = 2 };

constexpr std::array<Phase, 3> all_phases{Phase::A, Phase::B, Phase::C};

constexpr std::size_t index_of(Phase p) { return static_cast<std::size_t>(p); }

constexpr char phase_letter(Phase p) { return "abc"[index_of(p)]; }

/// Wraps an angle in degrees into (-180, 180].
inline double normalize_degrees(double deg) {
    double r = std::remainder(deg, 360.0);
    return r <= -180.0 ? r + 360.0 : r;
}

/// e^{j deg}, exact at multiples of 30 degrees so nominal three-phase sets
/// carry no trigonometric round-off.
inline Complex cis_degrees(double deg) {
    constexpr double half_sqrt3 = std::numbers::sqrt3 / 2.0;
    const double w = normalize_degrees(deg);
    const double steps = w / 30.0;
    if (steps == std::round(steps)) {
        static constexpr std::array<std::array<double, 2>, 12> table{{
            {1.0, 0.0}, {half_sqrt3, 0.5}, {0.5, half_sqrt3}, {0.0, 1.0},
            {-0.5, half_sqrt3}, {-half_sqrt3, 0.5}, {-1.0, 0.0}, {-half_sqrt3, -0.5},
            {-0.5, -half_sqrt3}, {0.0, -1.0}, {0.5, -half_sqrt3}, {half_sqrt3, -0.5},
        }};
        const int k = ((static_cast<int>(steps) % 12) + 12) % 12;
        return {table[k][0], table[k][1]};
    }
    const double rad = w * std::numbers::pi / 180.0;
    return {std::cos(rad), std::sin(rad)};
}

/// Rotation operator a = e^{j120°}.
inline const Complex rotation_a{-0.5, std::numbers::sqrt3 / 2.0};
inline const Complex rotation_a2{-0.5, -std::numbers::sqrt3 / 2.0};

class Phasor {
public:
    Phasor() = default;
    Phasor(double magnitude, double angle_deg)
        : magnitude_(magnitude), angle_deg_(normalize_degrees(angle_deg)) {
        require(std::isfinite(magnitude) && std::isfinite(angle_deg), "phasor components must be finite");
        require(magnitude >= 0.0, "phasor magnitude must be nonnegative");
    }

    static Phasor from_complex(Complex z) {
        const double mag = std::abs(z);
        return Phasor(mag, mag == 0.0 ? 0.0 : std::arg(z) * 180.0 / std::numbers::pi);
    }

    double magnitude() const { return magnitude_; }
    double angle_deg() const { return angle_deg_; }
    Complex value() const { return magnitude_ * cis_degrees(angle_deg_); }

    friend bool operator==(const Phasor&, const Phasor&) = default;

private:
    double magnitude_ = 0.0;
    double angle_deg_ = 0.0;
};

/// Three phase-to-neutral voltages. The all-zero triple is rejected.
class PhasorTriple {
public:
    PhasorTriple(Phasor a, Phasor b, Phasor c) : p_{a, b, c} {
        require(a.magnitude() > 0.0 || b.magnitude() > 0.0 || c.magnitude() > 0.0,
                "phasor triple must have at least one nonzero magnitude");
    }

    static PhasorTriple from_complex(const PhaseArray& v) {
        return {Phasor::from_complex(v[0]), Phasor::from_complex(v[1]), Phasor::from_complex(v[2])};
    }

    /// Magnitudes at the nominal 0/-120/+120 degree positions.
    static PhasorTriple nominal(double ma, double mb, double mc) {
        return {Phasor(ma, 0.0), Phasor(mb, -120.0), Phasor(mc, 120.0)};
    }

    static PhasorTriple balanced(double magnitude) { return nominal(magnitude, magnitude, magnitude); }

    const Phasor& a() const { return p_[0]; }
    const Phasor& b() const { return p_[1]; }
    const Phasor& c() const { return p_[2]; }
    const Phasor& operator[](Phase p) const { return p_[index_of(p)]; }

    PhaseArray values() const { return {p_[0].value(), p_[1].value(), p_[2].value()}; }
    std::array<double, 3> magnitudes() const {
        return {p_[0].magnitude(), p_[1].magnitude(), p_[2].magnitude()};
    }
    double max_magnitude() const {
        return std::max({p_[0].magnitude(), p_[1].magnitude(), p_[2].magnitude()});
    }

    friend bool operator==(const PhasorTriple&, const PhasorTriple&) = default;

private:
    std::array<Phasor, 3> p_;
};

/// Line-to-line voltage magnitudes |Va-Vb|, |Vb-Vc|, |Vc-Va|.
class LineVoltageTriple {
public:
    LineVoltageTriple(double ab, double bc, double ca) : v_{ab, bc, ca} {
        for (double x : v_) {
            require(std::isfinite(x) && x >= 0.0, "line voltage magnitudes must be finite and nonnegative");
        }
        require(ab > 0.0 || bc > 0.0 || ca > 0.0, "line voltage triple must have a nonzero magnitude");
    }

    double ab() const { return v_[0]; }
    double bc() const { return v_[1]; }
    double ca() const { return v_[2]; }
    const std::array<double, 3>& values() const { return v_; }

private:
    std::array<double, 3> v_;
};

struct SequenceSet {
    Complex zero;
    Complex positive;
    Complex negative;
};

}  // namespace unbalance
