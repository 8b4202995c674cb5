#pragma once

// Everything: demand traces, costs, envelopes, both solvers, baselines and the experiment harness.
#include "edgecache/baselines.hpp"
#include "edgecache/common.hpp"
#include "edgecache/convex_program.hpp"
#include "edgecache/cost.hpp"
#include "edgecache/d2d_solver.hpp"
#include "edgecache/demand.hpp"
#include "edgecache/envelope.hpp"
#include "edgecache/harness.hpp"
#include "edgecache/sbs_solver.hpp"
#include "edgecache/trace_io.hpp"
