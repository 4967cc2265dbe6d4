#pragma once

#include "fpcd/change_detection.hpp"
#include "fpcd/error.hpp"
#include "fpcd/evaluation.hpp"
#include "fpcd/kernel.hpp"
#include "fpcd/labeling.hpp"
#include "fpcd/metrics.hpp"
#include "fpcd/parallel.hpp"
#include "fpcd/positioning.hpp"
#include "fpcd/rfm.hpp"
#include "fpcd/rng.hpp"
#include "fpcd/robust.hpp"
#include "fpcd/similarity.hpp"
#include "fpcd/simulation.hpp"
#include "fpcd/spatial_index.hpp"
#include "fpcd/types.hpp"
