#pragma once

// Umbrella header: the whole pipeline from exact polynomial phase-space
// algebra through constraint analysis to numeric flows and reports. The
// command-line layer lives separately in hamdirac/cli.hpp.

#include "hamdirac/rational.hpp"
#include "hamdirac/chart.hpp"
#include "hamdirac/expr.hpp"
#include "hamdirac/variational.hpp"
#include "hamdirac/parse.hpp"
#include "hamdirac/dirac.hpp"
#include "hamdirac/flow.hpp"
#include "hamdirac/report.hpp"
