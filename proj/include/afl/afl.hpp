#pragma once

#include "afl/analytic.hpp"
#include "afl/baseline.hpp"
#include "afl/data.hpp"
#include "afl/embedding_file.hpp"
#include "afl/error.hpp"
#include "afl/harness/config.hpp"
#include "afl/harness/experiment.hpp"
#include "afl/harness/metrics.hpp"
#include "afl/harness/parallel.hpp"
#include "afl/harness/sweep.hpp"
#include "afl/harness/table_a1.hpp"
#include "afl/linalg.hpp"
#include "afl/rng.hpp"
#include "afl/update_file.hpp"
