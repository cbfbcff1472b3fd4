#pragma once

#include <cmath>
#include <random>

#include "ffevss/environment.hpp"
#include "ffevss/trajectory.hpp"

namespace ffevss {

/// Every ready shuttle takes the legal node with the smallest immediate
/// cost (travel time, or known waiting time when staying put); ties go to
/// the lowest node index.
Trajectory greedy_baseline(Environment& env);

/// Uniformly random legal actions.
Trajectory random_policy(Environment& env, std::mt19937_64& rng);

}  // namespace ffevss
