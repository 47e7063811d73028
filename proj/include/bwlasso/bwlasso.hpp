// SPDX-License-Identifier: Apache-2.0
#pragma once

// Umbrella header.

#include "error.hpp"
#include "gmp.hpp"
#include "pa_sim.hpp"
#include "pipeline.hpp"
#include "rng.hpp"
#include "signal.hpp"
#include "solver.hpp"
#include "text.hpp"
