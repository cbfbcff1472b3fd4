#include "ffevss/baselines.hpp"

namespace ffevss {

Trajectory greedy_baseline(Environment& env) {
  return run_episode(env, [](const Environment& e, int shuttle, const std::vector<int>& legal, TrajectoryRecord&) {
    int best = legal.front();
    double best_cost = e.immediate_cost(shuttle, best);
    for (int n : legal) {
      const double cost = e.immediate_cost(shuttle, n);
      if (cost < best_cost || (cost == best_cost && n < best)) {
        best = n;
        best_cost = cost;
      }
    }
    return best;
  });
}

Trajectory random_policy(Environment& env, std::mt19937_64& rng) {
  return run_episode(env, [&rng](const Environment&, int, const std::vector<int>& legal, TrajectoryRecord& rec) {
    std::uniform_int_distribution<std::size_t> pick(0, legal.size() - 1);
    rec.log_prob = -std::log(static_cast<double>(legal.size()));
    return legal[pick(rng)];
  });
}

}  // namespace ffevss
