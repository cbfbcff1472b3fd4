#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "ffevss/environment.hpp"

namespace ffevss {

/// One dispatch: a ready shuttle receiving an action at a decision event.
/// `reward` is nonzero only on the last dispatch of each event, where it
/// carries the clock advance that followed.
struct TrajectoryRecord {
  double clock = 0.0;
  int shuttle = 0;
  std::optional<Observation> observation;
  std::vector<int> legal;
  int action = -1;
  double log_prob = 0.0;
  double reward = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryRecord> records;
  bool terminal = false;   // finished with every demander served and the fleet home
  bool truncated = false;  // stopped by the step limit
  double total_reward = 0.0;
  double final_clock = 0.0;
  int decision_events = 0;

  double makespan() const { return -total_reward; }
  double total_log_prob() const;
};

/// Picks an action for `shuttle` from `legal`; may fill the record's
/// observation and log_prob.
using ActionChooser =
    std::function<int(const Environment& env, int shuttle, const std::vector<int>& legal, TrajectoryRecord& record)>;

/// Runs the decision loop until done: every ready shuttle (ascending id)
/// is asked for an action, assigned, and then the simulator advances.
Trajectory run_episode(Environment& env, const ActionChooser& choose);

/// Replays `(shuttle, node)` dispatches in order through `env`.
Trajectory replay_actions(Environment& env, const std::vector<std::pair<int, int>>& dispatches);

std::vector<std::pair<int, int>> dispatches(const Trajectory& trajectory);

/// One JSON object per line: {clock, shuttle, action, reward, mask_size}.
void write_trajectory_jsonl(std::ostream& out, const Trajectory& trajectory);

}  // namespace ffevss
