#pragma once

#include "pufent/bitgen.hpp"
#include "pufent/compensation.hpp"
#include "pufent/decomposition.hpp"
#include "pufent/error.hpp"
#include "pufent/fabric.hpp"
#include "pufent/pair_stats.hpp"
#include "pufent/pairing.hpp"
#include "pufent/pathstats.hpp"
#include "pufent/pipeline.hpp"
#include "pufent/simulator.hpp"
