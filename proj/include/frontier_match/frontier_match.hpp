#pragma once

// Umbrella header: propensity-matched DEA treatment-effect analysis toolkit.

#include "frontier_match/balance.hpp"
#include "frontier_match/dataset.hpp"
#include "frontier_match/dea.hpp"
#include "frontier_match/effects.hpp"
#include "frontier_match/errors.hpp"
#include "frontier_match/ftest.hpp"
#include "frontier_match/matching.hpp"
#include "frontier_match/pipeline.hpp"
#include "frontier_match/pscore.hpp"
#include "frontier_match/stats.hpp"
#include "frontier_match/synth.hpp"
#include "frontier_match/version.hpp"
