#pragma once

#include "dpsched/model.hpp"
#include "dpsched/simplex.hpp"
#include "dpsched/lp_oracle.hpp"
#include "dpsched/threshold.hpp"
#include "dpsched/simulate.hpp"
#include "dpsched/cli.hpp"
