#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "unbalance/unbalance.hpp"

namespace testing_support {

inline std::filesystem::path source_dir() { return UNBALANCE_SOURCE_DIR; }
inline std::filesystem::path data_dir() { return source_dir() / "data"; }
inline std::filesystem::path test_data(const std::string& name) { return source_dir() / "tests" / "data" / name; }

inline const unbalance::FeederModel& european_lv() {
    static const unbalance::FeederModel model = unbalance::load_feeder(data_dir() / "european_lv");
    return model;
}

/// Uniform draw from the 0.94-1.10 p.u., +/-5 degree envelope.
inline unbalance::PhasorTriple random_triple(std::mt19937_64& rng, double mag_lo = 0.94, double mag_hi = 1.10,
                                             double dev = 5.0) {
    std::uniform_real_distribution<double> mag(mag_lo, mag_hi), ang(-dev, dev);
    return {unbalance::Phasor(mag(rng), ang(rng)), unbalance::Phasor(mag(rng), -120.0 + ang(rng)),
            unbalance::Phasor(mag(rng), 120.0 + ang(rng))};
}

inline double rel_diff(double a, double b, double floor = 1e-12) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace testing_support
