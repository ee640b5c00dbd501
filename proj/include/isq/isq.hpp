#ifndef ISQ_ISQ_HPP
#define ISQ_ISQ_HPP

#include "isq/arm_model.hpp"
#include "isq/env_sim.hpp"
#include "isq/harness.hpp"
#include "isq/policies.hpp"
#include "isq/rng.hpp"
#include "isq/scenario_io.hpp"
#include "isq/whittle.hpp"

#endif  // ISQ_ISQ_HPP
