#pragma once

// Umbrella header.
#include "aot/core.hpp"
#include "aot/image_io.hpp"
#include "aot/feature_space.hpp"
#include "aot/ot_solvers.hpp"
#include "aot/neural.hpp"
#include "aot/metrics.hpp"
#include "aot/transfer.hpp"
#include "aot/mixgame.hpp"
