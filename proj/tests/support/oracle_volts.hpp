#pragma once

#include <array>
#include <complex>
#include <map>
#include <string>

namespace testing_support {

using Complex = std::complex<double>;
using Volts = std::array<Complex, 3>;

// Oracle: tests/oracles/powerflow_oracle.py (nodal fixed point, 40 digits).
inline const std::map<std::string, std::map<std::string, Volts>> oracle_volts{
    {"four_bus_two_branch.json",
     {{"s",
       {Complex{249.03286238842528, -0.81074664397991932}, Complex{-130.41483407140315, -214.69072456244906},
        Complex{-121.65690544296431, 215.37863181129904}}},
      {"1",
       {Complex{246.25421584111957, 1.2384881689132546}, Complex{-127.83182683491448, -210.01963895671474},
        Complex{-121.24967531605403, 216.60588407048459}}},
      {"2",
       {Complex{238.6035662921148, 1.6088890171455551}, Complex{-130.95864742910584, -210.5908796301284},
        Complex{-123.86428480652733, 214.44560237149615}}},
      {"3",
       {Complex{249.15724761091568, 3.7388438946897773}, Complex{-121.15217260832886, -204.40028988225018},
        Complex{-118.34664354625792, 219.10623979626112}}}}},
    {"two_bus_balanced.json",
     {{"s",
       {Complex{252.18659758202853, 0.0}, Complex{-126.09329879101427, -218.4},
        Complex{-126.09329879101427, 218.4}}},
      {"1",
       {Complex{248.97115363917496, -0.74349708429295898}, Complex{-125.12946418222484, -215.24359531889752},
        Complex{-123.84168945695012, 215.98709240319048}}}}},
    {"two_bus_single_phase.json",
     {{"1",
       {Complex{254.20336036701716, 2.8947906954468361}, Complex{-122.05977322103701, -212.61041860910633},
        Complex{-124.07653600602564, 221.29479069544684}}}}},
};

}  // namespace testing_support
