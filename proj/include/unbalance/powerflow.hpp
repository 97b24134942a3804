#pragma once

// Three-phase unbalanced power flow on a radial feeder by backward-forward
// sweep. Loads are constant-power, wye-connected to an implicit neutral;
// PV units are negative constant-power demands at unity power factor.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "unbalance/error.hpp"
#include "unbalance/feeder.hpp"
#include "unbalance/phasor.hpp"

namespace unbalance {

struct SolveOptions {
    double tolerance = 1e-8;  ///< max per-phase |ΔV| between sweeps, p.u.
    int max_iterations = 100;
    bool flat_start = true;
    /// Starting voltages (volts, one entry per bus) used when flat_start is false.
    std::optional<std::vector<Vector3c>> initial_voltages;
    /// Called after every sweep with (iteration, max |ΔV| in p.u.).
    std::function<void(int, double)> on_iteration;

    void validate() const {
        require(tolerance > 0.0, "solver tolerance must be positive");
        require(max_iterations >= 1, "solver needs at least one iteration");
    }
};

/// Complex power drawn at one bus and phase, kVA. Generation is negative.
struct PhaseDemand {
    std::size_t bus;
    Phase phase;
    Complex kva;
};

inline std::vector<PhaseDemand> demands(const FeederModel& model) {
    std::vector<PhaseDemand> out;
    out.reserve(model.loads().size() + model.pv_units().size());
    for (const LoadPoint& l : model.loads()) {
        const double q = l.kw * std::tan(std::acos(l.power_factor));
        out.push_back({l.bus, l.phase, {l.kw, q}});
    }
    for (const PvUnit& p : model.pv_units()) out.push_back({p.bus, p.phase, {-p.kw, 0.0}});
    return out;
}

struct Solution {
    std::vector<Vector3c> voltages;  ///< volts, phase-to-neutral, indexed by bus
    double phase_base_volts = 0.0;
    int iterations = 0;
    bool converged = false;
    double max_residual_kva = 0.0;
    std::vector<double> delta_v_history;  ///< p.u., one entry per sweep

    PhasorTriple phasors(std::size_t bus) const {
        const Vector3c& v = voltages.at(bus);
        return PhasorTriple::from_complex({v[0], v[1], v[2]});
    }
    PhasorTriple phasors_pu(std::size_t bus) const {
        const Vector3c v = voltages.at(bus) / phase_base_volts;
        return PhasorTriple::from_complex({v[0], v[1], v[2]});
    }
};

namespace detail {

inline std::vector<Vector3c> demand_table(const FeederModel& model, std::span<const PhaseDemand> d) {
    std::vector<Vector3c> s(model.bus_count(), Vector3c::Zero());
    for (const PhaseDemand& x : d) {
        if (x.bus >= model.bus_count()) fail(ErrorKind::DanglingReference, "demand references an unknown bus");
        s[x.bus][static_cast<int>(index_of(x.phase))] += x.kva * 1000.0;
    }
    return s;
}

/// Current drawn by the network below each bus through its parent segment,
/// recomputed from bus voltages (amps).
inline std::vector<Vector3c> segment_currents(const FeederModel& model, const std::vector<Vector3c>& v) {
    std::vector<Vector3c> into(model.bus_count(), Vector3c::Zero());
    for (std::size_t b : model.traversal_order()) {
        const std::size_t seg = model.parent_segment(b);
        if (seg == no_index) continue;
        into[b] = model.segment_impedance(seg).partialPivLu().solve(v[model.parent_bus(b)] - v[b]);
    }
    return into;
}

}  // namespace detail

inline std::vector<std::array<Complex, 3>> power_balance_residual(const FeederModel& model, const Solution& sol,
                                                                  std::span<const PhaseDemand> demand);
inline double max_abs_residual(const std::vector<std::array<Complex, 3>>& r);

/// Backward-forward sweep from the source voltage. Throws NonConvergence
/// when iterations run out and CollapsedVoltage when any bus falls below
/// 0.5 p.u.
inline Solution solve_snapshot(const FeederModel& model, std::span<const PhaseDemand> demand,
                               const SolveOptions& opts = {}) {
    opts.validate();
    const std::size_t n = model.bus_count();
    const std::vector<Vector3c> s = detail::demand_table(model, demand);
    const SourceSpec& src = model.source();
    const double vbase = src.phase_base_volts();
    const Vector3c vsrc = src.voltage_volts();

    std::vector<Matrix3c> z(n, Matrix3c::Zero());
    for (std::size_t b = 0; b < n; ++b) {
        if (model.parent_segment(b) != no_index) z[b] = model.segment_impedance(model.parent_segment(b));
    }

    Solution sol;
    sol.phase_base_volts = vbase;
    if (!opts.flat_start && opts.initial_voltages) {
        require(opts.initial_voltages->size() == n, "warm start needs one voltage vector per bus");
        sol.voltages = *opts.initial_voltages;
    } else {
        sol.voltages.assign(n, vsrc);
    }

    const auto& order = model.traversal_order();
    std::vector<Vector3c> current(n);
    for (int it = 1; it <= opts.max_iterations; ++it) {
        for (std::size_t b = 0; b < n; ++b) {
            for (int p = 0; p < 3; ++p) {
                current[b][p] = s[b][p] == Complex{} ? Complex{} : std::conj(s[b][p] / sol.voltages[b][p]);
            }
        }
        for (auto b = order.rbegin(); b != order.rend(); ++b) {
            const std::size_t parent = model.parent_bus(*b);
            if (parent != no_index) current[parent] += current[*b];
        }

        double delta = 0.0;
        double lowest = std::numeric_limits<double>::infinity();
        for (std::size_t b : order) {
            const std::size_t parent = model.parent_bus(b);
            const Vector3c next = parent == no_index ? Vector3c(vsrc - src.impedance_ohm * current[b])
                                                     : Vector3c(sol.voltages[parent] - z[b] * current[b]);
            for (int p = 0; p < 3; ++p) {
                delta = std::max(delta, std::abs(next[p] - sol.voltages[b][p]) / vbase);
                lowest = std::min(lowest, std::abs(next[p]) / vbase);
            }
            sol.voltages[b] = next;
        }
        sol.delta_v_history.push_back(delta);
        if (opts.on_iteration) opts.on_iteration(it, delta);
        if (!(lowest >= 0.5)) {
            fail(ErrorKind::CollapsedVoltage, "bus voltage fell to " + std::to_string(lowest) +
                                                  " p.u. at iteration " + std::to_string(it) +
                                                  "; demand exceeds what the feeder can deliver");
        }
        if (delta < opts.tolerance) {
            sol.iterations = it;
            sol.converged = true;
            break;
        }
    }
    if (!sol.converged) {
        fail(ErrorKind::NonConvergence, "no convergence in " + std::to_string(opts.max_iterations) +
                                            " iterations; last max |dV| = " +
                                            std::to_string(sol.delta_v_history.back()) + " p.u.");
    }
    sol.max_residual_kva = max_abs_residual(power_balance_residual(model, sol, demand));
    return sol;
}

/// Per bus and phase: specified demand minus the power actually delivered by
/// the network at the solved voltages, kVA. The source bus row is zero.
inline std::vector<std::array<Complex, 3>> power_balance_residual(const FeederModel& model, const Solution& sol,
                                                                  std::span<const PhaseDemand> demand) {
    const std::vector<Vector3c> s = detail::demand_table(model, demand);
    const std::vector<Vector3c> into = detail::segment_currents(model, sol.voltages);
    std::vector<std::array<Complex, 3>> out(model.bus_count(), std::array<Complex, 3>{});
    for (std::size_t b = 0; b < model.bus_count(); ++b) {
        if (b == model.root()) continue;
        Vector3c net = into[b];
        for (std::size_t c : model.children(b)) net -= into[c];
        for (int p = 0; p < 3; ++p) out[b][p] = (s[b][p] - sol.voltages[b][p] * std::conj(net[p])) / 1000.0;
    }
    return out;
}

inline std::vector<std::array<Complex, 3>> power_balance_residual(const FeederModel& model, const Solution& sol) {
    const auto d = demands(model);
    return power_balance_residual(model, sol, d);
}

inline double max_abs_residual(const std::vector<std::array<Complex, 3>>& r) {
    double m = 0.0;
    for (const auto& row : r) {
        for (const Complex& x : row) m = std::max(m, std::abs(x));
    }
    return m;
}

/// Per-phase complex power delivered by the ideal source, kVA.
inline std::array<Complex, 3> slack_power_kva(const FeederModel& model, const Solution& sol,
                                              std::span<const PhaseDemand> demand) {
    const std::vector<Vector3c> s = detail::demand_table(model, demand);
    const std::vector<Vector3c> into = detail::segment_currents(model, sol.voltages);
    const std::size_t root = model.root();
    Vector3c total = Vector3c::Zero();
    for (std::size_t c : model.children(root)) total += into[c];
    for (int p = 0; p < 3; ++p) {
        if (s[root][p] != Complex{}) total[p] += std::conj(s[root][p] / sol.voltages[root][p]);
    }
    const Vector3c vsrc = model.source().voltage_volts();
    std::array<Complex, 3> out{};
    for (int p = 0; p < 3; ++p) out[p] = vsrc[p] * std::conj(total[p]) / 1000.0;
    return out;
}

inline Solution solve_snapshot(const FeederModel& model, const SolveOptions& opts = {}) {
    const auto d = demands(model);
    return solve_snapshot(model, d, opts);
}

}  // namespace unbalance
