#include "ffevss/trajectory.hpp"

#include <ostream>

#include "ffevss/errors.hpp"
#include "json.hpp"

namespace ffevss {

double Trajectory::total_log_prob() const {
  double total = 0.0;
  for (const TrajectoryRecord& r : records) total += r.log_prob;
  return total;
}

Trajectory run_episode(Environment& env, const ActionChooser& choose) {
  Trajectory traj;
  while (!env.done()) {
    const std::vector<int> ready = env.ready_shuttles();
    for (int s : ready) {
      TrajectoryRecord rec;
      rec.clock = env.clock();
      rec.shuttle = s;
      rec.legal = env.legal_actions(s);
      rec.action = choose(env, s, rec.legal, rec);
      env.assign(s, rec.action);
      traj.records.push_back(std::move(rec));
    }
    const StepOutcome out = env.advance();
    ++traj.decision_events;
    if (!traj.records.empty()) traj.records.back().reward += out.reward;
    traj.total_reward += out.reward;
  }
  traj.final_clock = env.clock();
  traj.truncated = env.truncated();
  traj.terminal = !env.truncated();
  return traj;
}

Trajectory replay_actions(Environment& env, const std::vector<std::pair<int, int>>& dispatches) {
  std::size_t next = 0;
  return run_episode(env, [&](const Environment&, int shuttle, const std::vector<int>&, TrajectoryRecord&) {
    if (next >= dispatches.size()) throw FeasibilityError("replay: action sequence exhausted");
    const auto [s, node] = dispatches[next++];
    if (s != shuttle)
      throw FeasibilityError("replay: expected shuttle " + std::to_string(s) + ", simulator asked for " +
                             std::to_string(shuttle));
    return node;
  });
}

std::vector<std::pair<int, int>> dispatches(const Trajectory& trajectory) {
  std::vector<std::pair<int, int>> out;
  out.reserve(trajectory.records.size());
  for (const TrajectoryRecord& r : trajectory.records) out.emplace_back(r.shuttle, r.action);
  return out;
}

void write_trajectory_jsonl(std::ostream& out, const Trajectory& trajectory) {
  for (const TrajectoryRecord& r : trajectory.records) {
    nlohmann::json line = {{"clock", r.clock},
                           {"shuttle", r.shuttle},
                           {"action", r.action},
                           {"reward", r.reward},
                           {"mask_size", r.legal.size()}};
    out << line.dump() << '\n';
  }
}

}  // namespace ffevss
