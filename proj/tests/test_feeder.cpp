#include <catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>

#include "support/common.hpp"
#include "unbalance/feeder.hpp"

using namespace unbalance;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using testing_support::data_dir;
using testing_support::european_lv;

namespace fs = std::filesystem;

namespace {

template <typename F>
Error error_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e;
    }
    FAIL("expected an unbalance::Error");
    return Error(ErrorKind::InvalidArgument, "");
}

/// Copy of the shipped dataset in a scratch directory that tests may edit.
class ScratchFeeder {
public:
    explicit ScratchFeeder(const std::string& tag) {
        dir_ = fs::temp_directory_path() / ("unbalance_feeder_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        for (const auto& e : fs::directory_iterator(data_dir() / "european_lv")) {
            fs::copy_file(e.path(), dir_ / e.path().filename());
        }
    }
    ~ScratchFeeder() { fs::remove_all(dir_); }

    const fs::path& path() const { return dir_; }

    std::vector<std::string> lines(const std::string& file) const {
        std::ifstream in(dir_ / file);
        std::vector<std::string> out;
        for (std::string l; std::getline(in, l);) out.push_back(l);
        return out;
    }
    void write(const std::string& file, const std::vector<std::string>& content) const {
        std::ofstream out(dir_ / file);
        for (const auto& l : content) out << l << '\n';
    }

private:
    fs::path dir_;
};

LineCode simple_code(const std::string& name = "c") { return {name, 0.3, 0.1, 1.2, 0.4, 0.0, 0.0}; }

FeederModel star(double len_a, double len_b, double len_c) {
    std::vector<Bus> buses{{"s", {}}, {"7", {}}, {"3", {}}, {"5", {}}};
    std::vector<LineSegment> segs{{"l7", 0, 1, len_a, 0}, {"l3", 0, 2, len_b, 0}, {"l5", 0, 3, len_c, 0}};
    return {buses, {simple_code()}, segs, {}, SourceSpec{}};
}

bool brute_force_tree(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    // Union-find: any edge joining an already-connected pair is a cycle.
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        return parent[x] == x ? x : parent[x] = find(parent[x]);
    };
    for (auto [a, b] : edges) {
        const auto ra = find(a), rb = find(b);
        if (ra == rb) return false;
        parent[ra] = rb;
    }
    for (std::size_t i = 1; i < n; ++i) {
        if (find(i) != find(0)) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("shipped IEEE dataset loads as a radial model with 55 load buses", "[feeder]") {
    const FeederModel& m = european_lv();
    CHECK(m.bus_count() == 906);
    CHECK(m.segments().size() == 905);
    CHECK(m.loads().size() == 55);
    CHECK(m.load_buses().size() == 55);
    CHECK(m.bus_id(m.root()) == "1");
    CHECK(m.traversal_order().size() == m.bus_count());

    std::array<int, 3> per_phase{};
    for (const auto& l : m.loads()) ++per_phase[static_cast<int>(l.phase)];
    CHECK(per_phase == std::array<int, 3>{21, 19, 15});

    for (std::size_t b = 0; b < m.bus_count(); ++b) {
        if (b == m.root()) {
            CHECK(m.parent_segment(b) == no_index);
            continue;
        }
        const auto& seg = m.segments()[m.parent_segment(b)];
        CHECK(m.cumulative_length_m(b) == m.cumulative_length_m(m.parent_bus(b)) + seg.length_m);
    }
}

TEST_CASE("traversal order puts every bus after its parent", "[feeder]") {
    const FeederModel& m = european_lv();
    std::vector<std::size_t> position(m.bus_count());
    for (std::size_t i = 0; i < m.traversal_order().size(); ++i) position[m.traversal_order()[i]] = i;
    CHECK(m.traversal_order().front() == m.root());
    for (std::size_t b = 0; b < m.bus_count(); ++b) {
        if (b != m.root()) CHECK(position[m.parent_bus(b)] < position[b]);
    }
}

TEST_CASE("a duplicated segment is rejected as not radial", "[feeder]") {
    ScratchFeeder f("dup");
    auto lines = f.lines("Lines.csv");
    std::string copy = lines[5];
    copy.replace(0, copy.find(','), "LINE_DUP");
    lines.push_back(copy);
    f.write("Lines.csv", lines);
    CHECK(error_of([&] { load_feeder(f.path()); }).kind() == ErrorKind::NotRadial);
}

TEST_CASE("a load on an unknown bus is a dangling reference", "[feeder]") {
    ScratchFeeder f("dangling");
    auto lines = f.lines("Loads.csv");
    lines.push_back("LOAD_X,1,X999,A,0.23,1,wye,1,0.95,Shape_1");
    f.write("Loads.csv", lines);
    const Error e = error_of([&] { load_feeder(f.path()); });
    CHECK(e.kind() == ErrorKind::DanglingReference);
    CHECK_THAT(std::string(e.what()), ContainsSubstring("X999"));
}

TEST_CASE("an unknown line code is a dangling reference", "[feeder]") {
    ScratchFeeder f("code");
    auto lines = f.lines("Lines.csv");
    lines[3] = lines[3].substr(0, lines[3].rfind(',')) + ",no_such_code";
    f.write("Lines.csv", lines);
    CHECK(error_of([&] { load_feeder(f.path()); }).kind() == ErrorKind::DanglingReference);
}

TEST_CASE("malformed numbers carry row and column diagnostics", "[feeder]") {
    ScratchFeeder f("parse");
    auto lines = f.lines("Loads.csv");
    // LOAD1 row: replace the kW field.
    lines[1] = "LOAD1,1,34,A,0.23,1,wye,one,0.95,Shape_1";
    f.write("Loads.csv", lines);
    const Error e = error_of([&] { load_feeder(f.path()); });
    CHECK(e.kind() == ErrorKind::ParseError);
    CHECK_THAT(std::string(e.what()), ContainsSubstring("line 2"));
    CHECK_THAT(std::string(e.what()), ContainsSubstring("'kW'"));
}

TEST_CASE("missing directory and missing files are parse errors", "[feeder]") {
    CHECK(error_of([] { load_feeder(data_dir() / "does_not_exist"); }).kind() == ErrorKind::ParseError);
    ScratchFeeder f("missing");
    fs::remove(f.path() / "Lines.csv");
    CHECK(error_of([&] { load_feeder(f.path()); }).kind() == ErrorKind::ParseError);
}

TEST_CASE("load-shape files are ignored", "[feeder]") {
    ScratchFeeder f("shapes");
    f.write("Shape_1.csv", {"time,mult", "garbage"});
    CHECK(load_feeder(f.path()) == european_lv());
}

TEST_CASE("phase impedance with equal sequence values has no coupling", "[feeder]") {
    const LineCode c{"eq", 0.2, 0.07, 0.2, 0.07, 0.0, 0.0};
    const Matrix3c z = phase_impedance(c);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            const Complex expect = i == j ? Complex{0.2, 0.07} : Complex{0.0, 0.0};
            CHECK(std::abs(z(i, j) - expect) < 1e-15);
        }
    }
}

TEST_CASE("phase impedance matches hand arithmetic", "[feeder]") {
    const Matrix3c z = phase_impedance({"x", 0.1, 0.1, 0.3, 0.3, 0.0, 0.0});
    // Oracle: tests/oracles/metrics_oracle.py
    CHECK_THAT(z(0, 0).real(), WithinAbs(0.16666666666666667, 1e-15));
    CHECK_THAT(z(0, 0).imag(), WithinAbs(0.16666666666666667, 1e-15));
    CHECK_THAT(z(0, 1).real(), WithinAbs(0.066666666666666667, 1e-15));
    CHECK_THAT(z(2, 1).imag(), WithinAbs(0.066666666666666667, 1e-15));
}

TEST_CASE("sequence to phase to sequence round trip", "[feeder][property]") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int i = 0; i < 2000; ++i) {
        const LineCode c{"r", u(rng), u(rng) + 1e-3, u(rng), u(rng), 0.0, 0.0};
        const Matrix3c z = phase_impedance(c);
        const auto [z1, z0] = phase_to_sequence(z);
        CHECK(std::abs(z1 - Complex(c.r1_ohm_per_km, c.x1_ohm_per_km)) < 1e-12);
        CHECK(std::abs(z0 - Complex(c.r0_ohm_per_km, c.x0_ohm_per_km)) < 1e-12);

        // Symmetric with equal diagonals.
        CHECK(z == z.transpose());
        CHECK(z(0, 0) == z(1, 1));
        CHECK(z(1, 1) == z(2, 2));
        CHECK(z(0, 1) == z(0, 2));
        CHECK(z(0, 1) == z(1, 2));
    }
}

TEST_CASE("every shipped line code yields a symmetric matrix", "[feeder][property]") {
    for (const auto& c : european_lv().line_codes()) {
        const Matrix3c z = phase_impedance(c);
        CHECK(z == z.transpose());
        CHECK(z(0, 0) == z(2, 2));
    }
}

TEST_CASE("main line of a two-bus model", "[feeder]") {
    std::vector<Bus> buses{{"s", {}}, {"1", {}}};
    const FeederModel m(buses, {simple_code()}, {{"l", 0, 1, 250.0, 0}}, {}, SourceSpec{});
    CHECK(main_line(m) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("main line tie in a star goes to the lowest bus id", "[feeder]") {
    CHECK(main_line(star(100.0, 100.0, 100.0)) == std::vector<std::size_t>{0, 2});
    CHECK(main_line(star(100.0, 90.0, 100.0)) == std::vector<std::size_t>{0, 3});
    CHECK(main_line(star(101.0, 90.0, 100.0)) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("IEEE main line ends at the farthest leaf", "[feeder]") {
    const FeederModel& m = european_lv();
    const auto path = main_line(m);
    REQUIRE(path.size() >= 2);
    CHECK(path.front() == m.root());
    CHECK(m.children(path.back()).empty());
    for (std::size_t i = 1; i < path.size(); ++i) CHECK(m.parent_bus(path[i]) == path[i - 1]);

    // Exhaustive depth-first search over the raw segment list.
    std::vector<std::vector<std::pair<std::size_t, double>>> adj(m.bus_count());
    for (const auto& s : m.segments()) {
        adj[s.from_bus].push_back({s.to_bus, s.length_m});
        adj[s.to_bus].push_back({s.from_bus, s.length_m});
    }
    double best = -1.0;
    std::size_t far = 0;
    std::vector<std::tuple<std::size_t, std::size_t, double>> stack{{m.root(), no_index, 0.0}};
    while (!stack.empty()) {
        auto [b, from, d] = stack.back();
        stack.pop_back();
        bool leaf = true;
        for (auto [o, len] : adj[b]) {
            if (o == from) continue;
            leaf = false;
            stack.push_back({o, b, d + len});
        }
        // Buses 881 and 882 tie exactly; the lower id wins.
        if (leaf && (d > best + 1e-9 || (std::abs(d - best) <= 1e-9 && bus_id_less(m.bus_id(b), m.bus_id(far))))) {
            best = d;
            far = b;
        }
    }
    CHECK(path.back() == far);
    CHECK_THAT(m.cumulative_length_m(path.back()), WithinAbs(best, 1e-9));
}

TEST_CASE("canonical JSON round trip reproduces the model", "[feeder][property]") {
    const FeederModel& m = european_lv();
    const auto j = to_json(m);
    CHECK(feeder_from_json(nlohmann::json::parse(j.dump())) == m);

    for (const char* name : {"two_bus_balanced.json", "two_bus_single_phase.json", "four_bus_two_branch.json"}) {
        const FeederModel small = load_model(testing_support::test_data(name));
        CHECK(feeder_from_json(nlohmann::json::parse(to_json(small).dump())) == small);
    }

    const FeederModel with_pv = m.with_pv({{m.load_buses()[3], Phase::B, 2.5}});
    CHECK(feeder_from_json(nlohmann::json::parse(to_json(with_pv).dump())) == with_pv);
}

TEST_CASE("radiality check agrees with a brute-force tree test", "[feeder][property]") {
    std::mt19937_64 rng(5);
    int trees = 0, rejected = 0;
    for (int trial = 0; trial < 3000; ++trial) {
        const std::size_t n = 2 + rng() % 6;
        const std::size_t e = n - 1 + (rng() % 3) - 1;  // n-2, n-1 or n edges
        std::vector<std::pair<std::size_t, std::size_t>> edges;
        while (edges.size() < e) {
            const std::size_t a = rng() % n, b = rng() % n;
            if (a != b) edges.push_back({a, b});
        }
        std::vector<Bus> buses;
        for (std::size_t i = 0; i < n; ++i) buses.push_back({"b" + std::to_string(i), {}});
        std::vector<LineSegment> segs;
        for (std::size_t i = 0; i < edges.size(); ++i) {
            segs.push_back({"s" + std::to_string(i), edges[i].first, edges[i].second, 10.0, 0});
        }
        const bool expect = brute_force_tree(n, edges);
        bool accepted = true;
        try {
            FeederModel(buses, {simple_code()}, segs, {}, SourceSpec{});
        } catch (const Error& err) {
            CHECK(err.kind() == ErrorKind::NotRadial);
            accepted = false;
        }
        CHECK(accepted == expect);
        (expect ? trees : rejected)++;
    }
    CHECK(trees > 100);
    CHECK(rejected > 100);
}

TEST_CASE("model construction validates its fields", "[feeder]") {
    std::vector<Bus> buses{{"s", {}}, {"1", {}}};
    const std::vector<LineSegment> segs{{"l", 0, 1, 250.0, 0}};
    CHECK(error_of([&] { FeederModel(buses, {{"z", 0, 0, 1, 1, 0, 0}}, segs, {}, SourceSpec{}); }).kind() ==
          ErrorKind::InvalidArgument);
    CHECK(error_of([&] { FeederModel(buses, {simple_code()}, {{"l", 0, 1, 0.0, 0}}, {}, SourceSpec{}); }).kind() ==
          ErrorKind::InvalidArgument);
    CHECK(error_of([&] { FeederModel(buses, {simple_code()}, {{"l", 0, 1, 5.0, 3}}, {}, SourceSpec{}); }).kind() ==
          ErrorKind::DanglingReference);
    CHECK(error_of([&] {
              FeederModel(buses, {simple_code()}, segs, {{"ld", 1, Phase::A, -1.0, 1.0}}, SourceSpec{});
          }).kind() == ErrorKind::InvalidArgument);
    CHECK(error_of([&] {
              FeederModel(buses, {simple_code()}, segs, {{"ld", 4, Phase::A, 1.0, 1.0}}, SourceSpec{});
          }).kind() == ErrorKind::DanglingReference);
    SourceSpec hot;
    hot.voltage_pu = {1.0, 1.12, 1.0};
    CHECK(error_of([&] { FeederModel(buses, {simple_code()}, segs, {}, hot); }).kind() == ErrorKind::InvalidArgument);
}

TEST_CASE("bus ids order numerically", "[feeder]") {
    CHECK(bus_id_less("2", "10"));
    CHECK_FALSE(bus_id_less("10", "2"));
    CHECK(bus_id_less("a9", "a10"));
    CHECK(bus_id_less("007", "8"));
    CHECK_FALSE(bus_id_less("5", "5"));
    std::vector<std::string> ids{"10", "1", "x2", "2", "x10", "100"};
    std::sort(ids.begin(), ids.end(), bus_id_less);
    CHECK(ids == std::vector<std::string>{"1", "2", "10", "100", "x2", "x10"});
}
