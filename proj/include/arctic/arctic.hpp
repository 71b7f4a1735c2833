#pragma once

// Umbrella header for the Arctic Auction equilibrium solver.

#include "basic_solution.hpp"
#include "generator.hpp"
#include "graph.hpp"
#include "instance.hpp"
#include "io.hpp"
#include "oracle.hpp"
#include "rational.hpp"
#include "solver.hpp"
#include "strong.hpp"
#include "trace.hpp"
#include "weak.hpp"
