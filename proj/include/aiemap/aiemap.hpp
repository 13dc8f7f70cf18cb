#pragma once

#include "aiemap/array_opt.hpp"
#include "aiemap/device.hpp"
#include "aiemap/error.hpp"
#include "aiemap/explore.hpp"
#include "aiemap/graph.hpp"
#include "aiemap/kernel_opt.hpp"
#include "aiemap/perf.hpp"
#include "aiemap/placement.hpp"
#include "aiemap/render.hpp"
#include "aiemap/sim.hpp"
#include "aiemap/verify.hpp"
