#pragma once

#include "unbalance/error.hpp"
#include "unbalance/phasor.hpp"
#include "unbalance/metrics.hpp"
#include "unbalance/bounds.hpp"
#include "unbalance/feeder.hpp"
#include "unbalance/powerflow.hpp"
#include "unbalance/scenario.hpp"
#include "unbalance/report.hpp"
