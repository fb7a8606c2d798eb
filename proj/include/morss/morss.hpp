#pragma once

// Umbrella header: multi-observer ranked-set sampling, shrinkage and
// restricted estimation, logistic IRLS, simulation studies, and the batch
// runner.

#include "morss/common.hpp"
#include "morss/config.hpp"
#include "morss/csv.hpp"
#include "morss/linear.hpp"
#include "morss/logistic.hpp"
#include "morss/report.hpp"
#include "morss/restricted.hpp"
#include "morss/rng.hpp"
#include "morss/runner.hpp"
#include "morss/sampling.hpp"
#include "morss/simulation.hpp"
#include "morss/version.hpp"
