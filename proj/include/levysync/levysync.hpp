#pragma once

// Umbrella header.

#include "levysync/averaging.hpp"
#include "levysync/config.hpp"
#include "levysync/errors.hpp"
#include "levysync/mc.hpp"
#include "levysync/parallel.hpp"
#include "levysync/report_io.hpp"
#include "levysync/rng.hpp"
#include "levysync/runner.hpp"
#include "levysync/sde.hpp"
#include "levysync/stable_noise.hpp"
#include "levysync/stats.hpp"
#include "levysync/svg_plot.hpp"
#include "levysync/synchro.hpp"
#include "levysync/version.hpp"
