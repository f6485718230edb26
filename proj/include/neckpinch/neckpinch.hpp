#pragma once

#include "neckpinch/errors.hpp"
#include "neckpinch/profile_grid.hpp"
#include "neckpinch/flow_history.hpp"
#include "neckpinch/geometry.hpp"
#include "neckpinch/solver.hpp"
#include "neckpinch/rescale.hpp"
#include "neckpinch/diagnostics.hpp"
#include "neckpinch/harness/config.hpp"
#include "neckpinch/harness/families.hpp"
#include "neckpinch/harness/experiments.hpp"
#include "neckpinch/harness/reports.hpp"
