#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "support/common.hpp"
#include "unbalance/metrics.hpp"

using namespace unbalance;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using testing_support::random_triple;
using testing_support::rel_diff;

namespace {

template <typename F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an unbalance::Error");
    return ErrorKind::InvalidArgument;
}

const PhasorTriple case1{Phasor(1.00, 0.0), Phasor(0.94, -122.0), Phasor(1.02, 121.0)};
const PhasorTriple case2{Phasor(1.10, 0.0), Phasor(0.94, -120.0), Phasor(1.00, 120.0)};

}  // namespace

TEST_CASE("phasor construction normalizes angles and rejects bad input", "[phasor]") {
    CHECK(Phasor(1.0, 180.0).angle_deg() == 180.0);
    CHECK(Phasor(1.0, -180.0).angle_deg() == 180.0);
    CHECK(Phasor(1.0, 540.0).angle_deg() == 180.0);
    CHECK_THAT(Phasor(1.0, 370.0).angle_deg(), WithinAbs(10.0, 1e-12));
    CHECK_THAT(Phasor(1.0, -190.0).angle_deg(), WithinAbs(170.0, 1e-12));
    CHECK(kind_of([] { Phasor(-1.0, 0.0); }) == ErrorKind::InvalidArgument);
    CHECK(kind_of([] { Phasor(std::nan(""), 0.0); }) == ErrorKind::InvalidArgument);
    CHECK(kind_of([] { PhasorTriple(Phasor(0, 0), Phasor(0, 10), Phasor(0, 20)); }) == ErrorKind::InvalidArgument);
    CHECK(kind_of([] { LineVoltageTriple(0, 0, 0); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("symmetrical components of balanced and reversed sets", "[sequence]") {
    const auto fwd = symmetrical_components(PhasorTriple(Phasor(240, 0), Phasor(240, -120), Phasor(240, 120)));
    CHECK_THAT(std::abs(fwd.positive - Complex(240, 0)), WithinAbs(0.0, 1e-12));
    CHECK_THAT(std::abs(fwd.negative), WithinAbs(0.0, 1e-12));
    CHECK_THAT(std::abs(fwd.zero), WithinAbs(0.0, 1e-12));

    const auto rev = symmetrical_components(PhasorTriple(Phasor(240, 0), Phasor(240, 120), Phasor(240, -120)));
    CHECK_THAT(std::abs(rev.negative - Complex(240, 0)), WithinAbs(0.0, 1e-12));
    CHECK_THAT(std::abs(rev.positive), WithinAbs(0.0, 1e-12));
    CHECK_THAT(std::abs(rev.zero), WithinAbs(0.0, 1e-12));
}

TEST_CASE("symmetrical components match the high-precision oracle", "[sequence][oracle]") {
    // tests/oracles/metrics_oracle.py, case 1
    const auto s = symmetrical_components(case1);
    CHECK_THAT(s.zero.real(), WithinAbs(-0.007820981595822644, 1e-14));
    CHECK_THAT(s.zero.imag(), WithinAbs(0.02571514544303806, 1e-14));
    CHECK_THAT(s.positive.real(), WithinAbs(0.98642400881915634, 1e-14));
    CHECK_THAT(s.positive.imag(), WithinAbs(-0.0050013574447739094, 1e-14));
    CHECK_THAT(s.negative.real(), WithinAbs(0.021396972776666306, 1e-14));
    CHECK_THAT(s.negative.imag(), WithinAbs(-0.020713787998264151, 1e-14));

    const auto back = phase_values(s);
    const auto orig = case1.values();
    for (int p = 0; p < 3; ++p) CHECK(std::abs(back[p] - orig[p]) / std::abs(orig[p]) < 1e-9);
}

TEST_CASE("inverse transform round trip on random triples", "[sequence][property]") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 10000; ++i) {
        const auto v = random_triple(rng, 0.0, 2.0, 180.0);
        const auto back = phase_values(symmetrical_components(v));
        const auto orig = v.values();
        const double scale = v.max_magnitude();
        for (int p = 0; p < 3; ++p) REQUIRE(std::abs(back[p] - orig[p]) <= 1e-9 * scale);
    }
}

TEST_CASE("vuf", "[vuf]") {
    CHECK(vuf(PhasorTriple::balanced(1.0)).value == 0.0);
    CHECK(kind_of([] { vuf(PhasorTriple(Phasor(240, 0), Phasor(240, 120), Phasor(240, -120))); }) ==
          ErrorKind::PositiveSequenceZero);
    const auto m = vuf(case2);
    CHECK_THAT(m.value, WithinRel(4.6052631578947409, 1e-13));
    CHECK_THAT(m.intermediate("positive_magnitude"), WithinRel(1.0133333333333333, 1e-13));
    CHECK_THAT(vuf(case1).value, WithinRel(3.0190202053582704, 1e-13));
}

TEST_CASE("line voltages", "[lines]") {
    const auto bal = line_voltages(PhasorTriple::balanced(1.0));
    for (double x : bal.values()) CHECK_THAT(x, WithinRel(std::sqrt(3.0), 1e-15));
    CHECK(kind_of([] { line_voltages(PhasorTriple(Phasor(1, 0), Phasor(1, 0), Phasor(1, 0))); }) ==
          ErrorKind::DegenerateTriple);
    const auto l = line_voltages(case1);
    CHECK_THAT(l.ab(), WithinRel(1.6970115546920784, 1e-14));
    CHECK_THAT(l.bc(), WithinRel(1.6716973955535598, 1e-14));
    CHECK_THAT(l.ca(), WithinRel(1.7581460897253421, 1e-14));
}

TEST_CASE("lvur", "[lvur]") {
    CHECK(lvur(LineVoltageTriple(1, 1, 1)).value == 0.0);
    const auto m = lvur(LineVoltageTriple(1.0, 1.0, 0.97));
    CHECK_THAT(m.value, WithinRel(2.0202020202020202, 1e-13));
    CHECK_THAT(m.intermediate("average"), WithinRel(0.99, 1e-15));
    CHECK_THAT(m.intermediate("max_deviation"), WithinRel(0.02, 1e-12));
    CHECK_THAT(lvur(line_voltages(case1)).value, WithinRel(2.8786308185901303, 1e-12));
    CHECK_THAT(lvur(line_voltages(case2)).value, WithinRel(4.3113118001434505, 1e-12));
}

TEST_CASE("cigre factor", "[cigre]") {
    const auto eq = cigre_factor(LineVoltageTriple(1, 1, 1));
    CHECK(eq.value == 0.0);
    CHECK_THAT(eq.intermediate("beta"), WithinRel(1.0 / 3.0, 1e-15));

    const auto flat = cigre_factor(LineVoltageTriple(2, 1, 1));
    CHECK_THAT(flat.intermediate("beta"), WithinAbs(0.5, 1e-15));
    CHECK_THAT(flat.intermediate("radicand"), WithinAbs(0.0, 1e-15));
    CHECK_THAT(flat.value, WithinRel(100.0, 1e-12));

    CHECK(kind_of([] { cigre_factor(LineVoltageTriple(3, 1, 1)); }) == ErrorKind::NotRealizable);
    CHECK_THAT(cigre_factor(line_voltages(case1)).intermediate("beta"), WithinRel(0.33393985939519716, 1e-13));
    CHECK_THAT(cigre_factor(line_voltages(case2)).value, WithinRel(4.6052631578947409, 1e-10));
}

TEST_CASE("pvur1 and pvur2", "[pvur]") {
    const auto v = PhasorTriple::nominal(1.00, 0.95, 1.05);
    CHECK_THAT(pvur1(v).value, WithinRel(5.0, 1e-12));
    CHECK_THAT(pvur2(v).value, WithinRel(10.0, 1e-12));
    CHECK_THAT(pvur2(v).intermediate("average"), WithinRel(1.0, 1e-15));

    const PhasorTriple skew{Phasor(1, 3), Phasor(1, -124), Phasor(1, 118)};
    CHECK(pvur1(skew).value == 0.0);
    CHECK(pvur2(skew).value == 0.0);
    CHECK(vuf(skew).value > 0.0);

    CHECK_THAT(pvur1(case2).value, WithinRel(8.5526315789473759, 1e-13));
    CHECK_THAT(pvur2(case2).value, WithinRel(15.78947368421054, 1e-13));
}

TEST_CASE("absolute error", "[error]") {
    CHECK(absolute_error(2.0, 2.0) == 0.0);
    CHECK_THAT(absolute_error(0.7, 1.0), WithinAbs(0.3, 1e-15));
    CHECK(kind_of([] { absolute_error(-1.0, 1.0); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("balanced triples give zero for every index", "[property]") {
    for (double m : {1.0, 240.0, 0.94, 1.1}) {
        const IndexSet s = compute_all(PhasorTriple::balanced(m));
        for (IndexKind k : all_indices) CHECK(s[k].value == 0.0);
    }
}

TEST_CASE("index invariance properties over 10000 random triples", "[property]") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> theta(-180.0, 180.0), scale(0.01, 100.0), off(-0.3, 0.3);

    for (int i = 0; i < 10000; ++i) {
        const PhasorTriple v = random_triple(rng);
        const IndexSet base = compute_all(v);

        // rotation
        const double t = theta(rng);
        const PhasorTriple rot{Phasor(v.a().magnitude(), v.a().angle_deg() + t),
                               Phasor(v.b().magnitude(), v.b().angle_deg() + t),
                               Phasor(v.c().magnitude(), v.c().angle_deg() + t)};
        const IndexSet r = compute_all(rot);
        // scale
        const double k = scale(rng);
        const PhasorTriple sc{Phasor(k * v.a().magnitude(), v.a().angle_deg()),
                              Phasor(k * v.b().magnitude(), v.b().angle_deg()),
                              Phasor(k * v.c().magnitude(), v.c().angle_deg())};
        const IndexSet s = compute_all(sc);
        for (IndexKind kind : all_indices) {
            REQUIRE(rel_diff(base[kind].value, r[kind].value) < 1e-9);
            REQUIRE(rel_diff(base[kind].value, s[kind].value) < 1e-9);
        }

        // zero sequence: line quantities are unchanged, phase magnitudes are not
        const Complex c{off(rng), off(rng)};
        const auto vals = v.values();
        const PhasorTriple shifted = PhasorTriple::from_complex({vals[0] + c, vals[1] + c, vals[2] + c});
        const auto l0 = line_voltages(v).values();
        const auto l1 = line_voltages(shifted).values();
        for (int p = 0; p < 3; ++p) REQUIRE(rel_diff(l0[p], l1[p]) < 1e-12);
        const IndexSet z = compute_all(shifted);
        REQUIRE(rel_diff(base.lvur.value, z.lvur.value) < 1e-9);
        REQUIRE(rel_diff(base.cigre.value, z.cigre.value) < 1e-9);
        REQUIRE(rel_diff(base.vuf.value, z.vuf.value) < 1e-9);
    }
}

TEST_CASE("a zero-sequence offset changes the phase-magnitude indices", "[property]") {
    const PhasorTriple v = PhasorTriple::nominal(1.0, 0.97, 1.02);
    const auto vals = v.values();
    const Complex c{0.05, 0.02};
    const PhasorTriple shifted = PhasorTriple::from_complex({vals[0] + c, vals[1] + c, vals[2] + c});
    CHECK(std::abs(pvur1(v).value - pvur1(shifted).value) > 0.1);
    CHECK(std::abs(pvur2(v).value - pvur2(shifted).value) > 0.1);
    CHECK(rel_diff(lvur(line_voltages(v)).value, lvur(line_voltages(shifted)).value) < 1e-9);
}

TEST_CASE("CIGRE reproduces VUF and stored intermediates reproduce every value", "[property]") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 10000; ++i) {
        const PhasorTriple v = i % 2 ? random_triple(rng) : random_triple(rng, 0.2, 1.5, 40.0);
        const IndexSet s = compute_all(v);
        REQUIRE(rel_diff(s.cigre.value, s.vuf.value) < 1e-9);
        REQUIRE(s.pvur2.value >= s.pvur1.value);
        for (IndexKind k : all_indices) {
            REQUIRE(s[k].value >= 0.0);
            REQUIRE(std::abs(recompute(s[k]) - s[k].value) <= 1e-12 * std::max(1.0, s[k].value));
        }
    }
}

TEST_CASE("CIGRE stays accurate close to balance", "[cigre]") {
    for (double eps : {1e-3, 1e-5, 1e-7}) {
        const PhasorTriple v = PhasorTriple::nominal(1.0, 1.0 - eps, 1.0 + eps);
        const IndexSet s = compute_all(v);
        CHECK(rel_diff(s.cigre.value, s.vuf.value) < 1e-9);
    }
}

TEST_CASE("balanced triples rotated or offset still give zero", "[property]") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> theta(-180.0, 180.0), mag(0.5, 300.0);
    for (int i = 0; i < 1000; ++i) {
        const double m = mag(rng), t = theta(rng);
        const IndexSet s = compute_all(PhasorTriple(Phasor(m, t), Phasor(m, t - 120.0), Phasor(m, t + 120.0)));
        for (IndexKind k : all_indices) REQUIRE(s[k].value == 0.0);
    }
}

TEST_CASE("index names parse back", "[metrics]") {
    for (IndexKind k : all_indices) CHECK(parse_index_kind(to_string(k)) == k);
    CHECK_FALSE(parse_index_kind("NEMA").has_value());
}
