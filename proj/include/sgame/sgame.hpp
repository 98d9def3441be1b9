#pragma once

#include "sgame/belief.hpp"
#include "sgame/core_model.hpp"
#include "sgame/diagnostics.hpp"
#include "sgame/equilibrium.hpp"
#include "sgame/io.hpp"
#include "sgame/simulator.hpp"
#include "sgame/strategy_tree.hpp"
#include "sgame/trajectory.hpp"
