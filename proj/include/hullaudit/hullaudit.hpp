#pragma once

// Convenience umbrella for the whole library.

#include "hullaudit/errors.hpp"
#include "hullaudit/harness.hpp"
#include "hullaudit/ingest.hpp"
#include "hullaudit/oracle.hpp"
#include "hullaudit/report.hpp"
#include "hullaudit/solver.hpp"
#include "hullaudit/transform.hpp"
