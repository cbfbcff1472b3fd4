#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ffevss/environment.hpp"

namespace ffevss {

struct OracleLimits {
  int max_non_depot_nodes = 8;
  int max_shuttles = 2;
  int max_drivers = 2;
  std::uint64_t max_expansions = 20'000'000;
};

struct OracleResult {
  double makespan = 0.0;
  std::vector<std::pair<int, int>> dispatches;  // (shuttle, node) in dispatch order
  std::uint64_t expansions = 0;
};

/// Exact minimum makespan by depth-first search over every legal dispatch
/// sequence, cloning the simulator at each branch. The greedy route seeds
/// the incumbent; a branch is cut when its lower bound (pending completions
/// plus the return to the depot) cannot beat it.
/// Throws LimitExceeded when the instance or the search exceeds `limits`.
OracleResult oracle_optimal(const Environment& env, const OracleLimits& limits = {});

}  // namespace ffevss
