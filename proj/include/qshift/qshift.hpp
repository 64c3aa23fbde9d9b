#pragma once

#include "qshift/backend.hpp"
#include "qshift/core.hpp"
#include "qshift/error.hpp"
#include "qshift/experiments.hpp"
#include "qshift/fitting.hpp"
#include "qshift/job.hpp"
#include "qshift/matrix.hpp"
#include "qshift/mitigation.hpp"
#include "qshift/noise.hpp"
#include "qshift/pulse.hpp"
#include "qshift/report.hpp"
