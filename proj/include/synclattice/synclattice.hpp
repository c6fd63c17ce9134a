#pragma once

#include "synclattice/async_metric.hpp"
#include "synclattice/core_dynamics.hpp"
#include "synclattice/error.hpp"
#include "synclattice/synchrony.hpp"
#include "synclattice/transition.hpp"
