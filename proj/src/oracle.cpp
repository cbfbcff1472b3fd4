#include "ffevss/oracle.hpp"

#include <algorithm>

#include "ffevss/baselines.hpp"
#include "ffevss/errors.hpp"

namespace ffevss {

namespace {

// Absorbs the rounding of quantized legs when comparing the bound with
// finished makespans, so the bound never cuts an equal-or-better route.
constexpr double kSlack = 1e-6;

double to_depot(const NetworkInstance& inst, int node) { return quantize_minutes(inst.travel_minutes(node, 0)); }

/// Admissible lower bound on the final clock of any completion.
double lower_bound(const Environment& env) {
  const EnvState& st = env.state();
  const NetworkInstance& inst = env.instance();
  double bound = st.clock;
  for (const ShuttleState& s : st.shuttles) {
    if (s.parked) continue;
    if (s.current_action) {
      const double at = s.action_complete_at ? *s.action_complete_at : st.clock;
      bound = std::max(bound, at + to_depot(inst, *s.current_action));
    } else {
      bound = std::max(bound, st.clock + to_depot(inst, s.location));
    }
  }
  for (int n = 1; n < inst.size(); ++n) {
    const auto k = static_cast<std::size_t>(n);
    if (st.driver_count[k] > 0) bound = std::max(bound, st.clock + to_depot(inst, n));
    if (st.expected_driver[k]) bound = std::max(bound, st.driver_eta[k] + to_depot(inst, n));
  }
  return bound;
}

class Search {
 public:
  Search(const OracleLimits& limits, OracleResult& best) : limits_(limits), best_(best) {}

  void run(Environment env, std::vector<std::pair<int, int>>& path) {
    while (!env.done() && env.ready_shuttles().empty()) env.advance();
    if (env.done()) {
      if (!env.truncated() && env.clock() < best_.makespan) {
        best_.makespan = env.clock();
        best_.dispatches = path;
      }
      return;
    }
    if (lower_bound(env) - kSlack >= best_.makespan) return;

    const int shuttle = env.ready_shuttles().front();
    std::vector<int> legal = env.legal_actions(shuttle);
    std::stable_sort(legal.begin(), legal.end(), [&](int a, int b) {
      return env.immediate_cost(shuttle, a) < env.immediate_cost(shuttle, b);
    });
    for (int node : legal) {
      if (++best_.expansions > limits_.max_expansions)
        throw LimitExceeded("oracle: more than " + std::to_string(limits_.max_expansions) + " expansions");
      Environment child = env;
      child.assign(shuttle, node);
      path.emplace_back(shuttle, node);
      run(std::move(child), path);
      path.pop_back();
    }
  }

 private:
  const OracleLimits& limits_;
  OracleResult& best_;
};

}  // namespace

OracleResult oracle_optimal(const Environment& env, const OracleLimits& limits) {
  const NetworkInstance& inst = env.instance();
  if (inst.size() - 1 > limits.max_non_depot_nodes)
    throw LimitExceeded("oracle: " + std::to_string(inst.size() - 1) + " non-depot nodes exceeds the limit of " +
                        std::to_string(limits.max_non_depot_nodes));
  if (inst.num_shuttles() > limits.max_shuttles)
    throw LimitExceeded("oracle: " + std::to_string(inst.num_shuttles()) + " shuttles exceeds the limit of " +
                        std::to_string(limits.max_shuttles));
  if (inst.drivers_per_shuttle() > limits.max_drivers)
    throw LimitExceeded("oracle: " + std::to_string(inst.drivers_per_shuttle()) +
                        " drivers per shuttle exceeds the limit of " + std::to_string(limits.max_drivers));

  OracleResult best;
  best.makespan = kNever;
  Environment greedy = env;
  const Trajectory incumbent = greedy_baseline(greedy);
  if (incumbent.terminal) {
    best.makespan = incumbent.final_clock;
    best.dispatches = dispatches(incumbent);
  }
  std::vector<std::pair<int, int>> path;
  Search(limits, best).run(env, path);
  if (best.makespan == kNever) throw FeasibilityError("oracle: no route completes within the step limit");
  return best;
}

}  // namespace ffevss
