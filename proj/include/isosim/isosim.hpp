#pragma once

#include "isosim/anchors.hpp"
#include "isosim/bench.hpp"
#include "isosim/csv.hpp"
#include "isosim/device.hpp"
#include "isosim/errors.hpp"
#include "isosim/partition.hpp"
#include "isosim/report.hpp"
#include "isosim/rng.hpp"
#include "isosim/scenario.hpp"
#include "isosim/search.hpp"
#include "isosim/sim.hpp"
#include "isosim/workload.hpp"
