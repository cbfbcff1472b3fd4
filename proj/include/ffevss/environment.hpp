#pragma once

#include <map>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "ffevss/instance.hpp"
#include "ffevss/relocation.hpp"
#include "ffevss/state.hpp"

namespace ffevss {

struct EnvOptions {
  int max_steps = 0;  // 0 selects 10 x network size
};

/// Per-node features seen by the policy for one acting shuttle.
/// Static columns: x, y, initial charge. Dynamic columns: EV present or
/// expected, drivers present or expected, travel minutes from the shuttle
/// (omitted when distance is disabled), onboard drivers of the shuttle.
struct Observation {
  Eigen::MatrixXd static_features;
  Eigen::MatrixXd dynamic_features;
  int shuttle = 0;
  int location = 0;

  static constexpr int kStaticDim = 3;
  static int dynamic_dim(bool with_distance) { return with_distance ? 4 : 3; }
};

struct StepOutcome {
  double reward = 0.0;
  double clock = 0.0;
  bool done = false;
  bool truncated = false;
  std::vector<int> ready_shuttles;
  std::map<int, std::vector<int>> masks;  // legal set of every ready shuttle
};

/// Event-driven rebalancing simulator. A decision event hands every ready
/// shuttle a new action (assign), then advance() moves the clock to the
/// earliest action completion, firing delayed EV transitions on the way.
/// Copying an Environment clones the full episode state.
class Environment {
 public:
  explicit Environment(std::shared_ptr<const NetworkInstance> instance, EnvOptions options = {});

  StepOutcome reset();

  /// Legal nodes for a ready shuttle, given actions already assigned in
  /// this decision event. Never empty: a shuttle with nothing useful to do
  /// gets its own node as an idle action.
  std::vector<int> legal_actions(int shuttle) const;

  void assign(int shuttle, int node);
  StepOutcome advance();
  /// assign() for every entry (ascending shuttle id), then advance().
  StepOutcome step(const std::map<int, int>& actions);

  Observation observe(int shuttle, bool with_distance = true) const;

  /// Time the shuttle spends on `node` if chosen now: travel time, extended
  /// to the driver's arrival at a pickup whose driver is still on the way;
  /// the known waiting time when staying put; zero for an idle action.
  double immediate_cost(int shuttle, int node) const;

  /// Shuttles that still need an action in the current decision event.
  std::vector<int> ready_shuttles() const;

  bool done() const { return done_; }
  bool truncated() const { return truncated_; }
  double clock() const { return state_.clock; }
  int max_steps() const { return max_steps_; }
  const EnvState& state() const { return state_; }
  const NetworkInstance& instance() const { return *instance_; }
  const std::shared_ptr<const NetworkInstance>& instance_ptr() const { return instance_; }
  const relocation::RoleIndex& roles() const { return *roles_; }

  int drivers_outside() const;  // at nodes or travelling with EVs
  int total_drivers() const;
  int total_evs() const;
  bool all_demand_fulfilled() const;
  /// Largest (EVs at node + EVs heading there) over all nodes.
  int max_ev_load() const;

 private:
  bool is_droppable(int node) const;
  bool claimed_by_other(int shuttle, int node) const;
  bool awaits_driver(const ShuttleState& shuttle, int node) const;
  bool can_wait_here(const ShuttleState& shuttle) const;
  bool any_unclaimed_driver_outside() const;
  void fire(const DelayedEvent& event);
  void complete_action(ShuttleState& shuttle);
  void update_parking();
  void update_done();
  StepOutcome outcome(double reward) const;

  std::shared_ptr<const NetworkInstance> instance_;
  std::shared_ptr<const relocation::RoleIndex> roles_;
  int max_steps_;
  EnvState state_;
  bool done_ = false;
  bool truncated_ = false;
};

}  // namespace ffevss
