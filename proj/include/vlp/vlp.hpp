#pragma once

#include "vlp/embodiment.hpp"
#include "vlp/errors.hpp"
#include "vlp/executor.hpp"
#include "vlp/harness.hpp"
#include "vlp/oracle_planner.hpp"
#include "vlp/planner.hpp"
#include "vlp/policy.hpp"
#include "vlp/pose.hpp"
#include "vlp/primitives.hpp"
#include "vlp/scenario.hpp"
#include "vlp/sim.hpp"
#include "vlp/validate.hpp"
#include "vlp/world_state.hpp"
