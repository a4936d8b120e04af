#pragma once

#include "pflr/core.hpp"
#include "pflr/fsdar.hpp"
#include "pflr/inference.hpp"
#include "pflr/oracle.hpp"
#include "pflr/parallel.hpp"
#include "pflr/rkhs.hpp"
#include "pflr/simgen.hpp"
#include "pflr/tuning.hpp"

#include "pflr/harness/bench.hpp"
#include "pflr/harness/config.hpp"
#include "pflr/harness/csv.hpp"
#include "pflr/harness/experiment.hpp"
#include "pflr/harness/metrics.hpp"
#include "pflr/harness/screen.hpp"
#include "pflr/harness/variance.hpp"
