#include "ffevss/environment.hpp"

#include <algorithm>
#include <numeric>

#include "ffevss/errors.hpp"

namespace ffevss {

Environment::Environment(std::shared_ptr<const NetworkInstance> instance, EnvOptions options)
    : instance_(std::move(instance)),
      roles_(std::make_shared<const relocation::RoleIndex>(*instance_)),
      max_steps_(options.max_steps > 0 ? options.max_steps : 10 * instance_->size()) {
  reset();
}

StepOutcome Environment::reset() {
  const auto n = static_cast<std::size_t>(instance_->size());
  state_ = EnvState{};
  state_.ev_count.assign(n, 0);
  state_.driver_count.assign(n, 0);
  state_.expected_ev.assign(n, false);
  state_.expected_driver.assign(n, false);
  state_.driver_eta.assign(n, kNever);
  state_.relocated.assign(n, false);
  for (const Node& node : instance_->nodes())
    if (node.role == NodeRole::Supplier) state_.ev_count[static_cast<std::size_t>(node.id)] = 1;

  state_.charger_available.assign(roles_->chargers.size(), true);
  state_.charger_uses.assign(roles_->chargers.size(), 0);
  state_.demand_open.assign(roles_->demanders.size(), true);
  state_.demand_claimed.assign(roles_->demanders.size(), false);

  for (int i = 0; i < instance_->num_shuttles(); ++i) {
    ShuttleState s;
    s.shuttle_id = i;
    s.onboard_drivers = instance_->drivers_per_shuttle();
    state_.shuttles.push_back(s);
  }
  done_ = false;
  truncated_ = false;
  update_parking();
  update_done();
  return outcome(0.0);
}

bool Environment::is_droppable(int node) const {
  const auto k = static_cast<std::size_t>(node);
  return instance_->node(node).role == NodeRole::Supplier && state_.ev_count[k] == 1 &&
         !state_.relocated[k];
}

bool Environment::claimed_by_other(int shuttle, int node) const {
  for (const ShuttleState& s : state_.shuttles)
    if (s.shuttle_id != shuttle && s.current_action == node) return true;
  return false;
}

bool Environment::any_unclaimed_driver_outside() const {
  for (int n = 0; n < instance_->size(); ++n)
    if (state_.driver_count[static_cast<std::size_t>(n)] > 0 && !claimed_by_other(-1, n)) return true;
  return false;
}

bool Environment::awaits_driver(const ShuttleState& shuttle, int node) const {
  const auto k = static_cast<std::size_t>(node);
  return state_.expected_driver[k] && state_.driver_count[k] == 0 &&
         shuttle.onboard_drivers < instance_->drivers_per_shuttle();
}

bool Environment::can_wait_here(const ShuttleState& shuttle) const {
  return awaits_driver(shuttle, shuttle.location) && !claimed_by_other(shuttle.shuttle_id, shuttle.location);
}

bool Environment::all_demand_fulfilled() const {
  return std::none_of(state_.demand_open.begin(), state_.demand_open.end(),
                      [](bool open) { return open; });
}

std::vector<int> Environment::legal_actions(int shuttle) const {
  if (done_) throw ContractViolation("episode is over");
  const ShuttleState& me = state_.shuttles.at(static_cast<std::size_t>(shuttle));
  if (me.busy()) throw ContractViolation("shuttle " + std::to_string(shuttle) + " has an action in flight");
  if (me.parked) throw ContractViolation("shuttle " + std::to_string(shuttle) + " is parked");

  const int capacity = instance_->drivers_per_shuttle();
  const int onboard = me.onboard_drivers;
  const int here = me.location;

  // Drop-offs already dispatched by other shuttles hold a demander (and
  // possibly a charger) that the relocation will claim on arrival.
  int reserved_demand = 0, reserved_chargers = 0;
  for (const ShuttleState& s : state_.shuttles) {
    if (s.shuttle_id == shuttle || !s.current_action || !is_droppable(*s.current_action)) continue;
    ++reserved_demand;
    if (instance_->needs_charging(instance_->node(*s.current_action).initial_charge)) ++reserved_chargers;
  }
  int free_demand = -reserved_demand;
  for (std::size_t k = 0; k < state_.demand_open.size(); ++k)
    free_demand += state_.demand_open[k] && !state_.demand_claimed[k];
  const int free_chargers =
      static_cast<int>(std::count(state_.charger_available.begin(), state_.charger_available.end(), true)) -
      reserved_chargers;

  std::vector<int> legal;
  const bool fulfilled = all_demand_fulfilled();
  if (fulfilled && here != 0) {
    if (drivers_outside() == 0) return {0};
    legal.push_back(0);
  }

  for (int n = 1; n < instance_->size(); ++n) {
    const auto k = static_cast<std::size_t>(n);
    if (claimed_by_other(shuttle, n)) continue;
    if (n == here) {
      // Staying put only makes sense while a driver is on the way here.
      if (can_wait_here(me)) legal.push_back(n);
      continue;
    }
    const bool pickup = (state_.driver_count[k] > 0 || state_.expected_driver[k]) && onboard < capacity;
    const bool drop = onboard > 0 && is_droppable(n) && free_demand > 0 &&
                      (!instance_->needs_charging(instance_->node(n).initial_charge) || free_chargers > 0);
    if (pickup || drop) legal.push_back(n);
  }

  if (legal.empty()) legal.push_back(here);
  return legal;
}

void Environment::assign(int shuttle, int node) {
  const std::vector<int> legal = legal_actions(shuttle);
  if (std::find(legal.begin(), legal.end(), node) == legal.end())
    throw FeasibilityError("node " + std::to_string(node) + " is not legal for shuttle " +
                           std::to_string(shuttle));
  ShuttleState& s = state_.shuttles[static_cast<std::size_t>(shuttle)];
  s.current_action = node;
  if (node != s.location) {
    s.action_kind = ActionKind::Move;
    s.action_complete_at = state_.clock + quantize_minutes(instance_->travel_minutes(s.location, node));
    // A pickup visit lasts until the expected driver has arrived.
    if (awaits_driver(s, node))
      s.action_complete_at = std::max(*s.action_complete_at, state_.driver_eta[static_cast<std::size_t>(node)]);
  } else if (can_wait_here(s)) {
    s.action_kind = ActionKind::Wait;
    s.action_complete_at = state_.driver_eta[static_cast<std::size_t>(node)];
  } else {
    s.action_kind = ActionKind::Idle;
    s.action_complete_at.reset();  // resolved in advance()
  }
}

double Environment::immediate_cost(int shuttle, int node) const {
  const ShuttleState& s = state_.shuttles.at(static_cast<std::size_t>(shuttle));
  if (node != s.location) {
    const double travel = instance_->travel_minutes(s.location, node);
    if (!awaits_driver(s, node)) return travel;
    return std::max(travel, state_.driver_eta[static_cast<std::size_t>(node)] - state_.clock);
  }
  if (can_wait_here(s))
    return state_.driver_eta[static_cast<std::size_t>(node)] - state_.clock;
  return 0.0;
}

std::vector<int> Environment::ready_shuttles() const {
  std::vector<int> ready;
  if (done_) return ready;
  for (const ShuttleState& s : state_.shuttles)
    if (!s.busy() && !s.parked) ready.push_back(s.shuttle_id);
  return ready;
}

void Environment::fire(const DelayedEvent& event) {
  const auto k = static_cast<std::size_t>(event.node);
  switch (event.kind) {
    case EventKind::EvArrivesAtCharger: {
      state_.ev_count[k] = 1;
      ++state_.charger_uses[static_cast<std::size_t>(roles_->charger_pos[k])];
      DelayedEvent done = event;
      done.kind = EventKind::ChargingCompletes;
      done.fire_at = event.fire_at + quantize_minutes(instance_->charging_minutes(event.ev_charge));
      relocation::schedule(state_, done);
      break;
    }
    case EventKind::ChargingCompletes: {
      state_.ev_count[k] = 0;
      state_.expected_ev[k] = false;
      state_.charger_available[static_cast<std::size_t>(roles_->charger_pos[k])] = true;
      DelayedEvent leg = event;
      leg.kind = EventKind::EvArrivesAtDemander;
      leg.node = event.next_node;
      leg.next_node = -1;
      leg.fire_at = event.fire_at + quantize_minutes(instance_->travel_minutes(event.node, event.next_node));
      relocation::schedule(state_, leg);
      break;
    }
    case EventKind::EvArrivesAtDemander: {
      state_.ev_count[k] = 1;
      state_.expected_ev[k] = false;
      state_.demand_open[static_cast<std::size_t>(roles_->demander_pos[k])] = false;
      state_.driver_count[k] += event.driver_attached ? 1 : 0;
      state_.expected_driver[k] = false;
      state_.driver_eta[k] = kNever;
      break;
    }
  }
}

void Environment::complete_action(ShuttleState& shuttle) {
  const int node = *shuttle.current_action;
  const ActionKind kind = shuttle.action_kind;
  shuttle.location = node;
  shuttle.current_action.reset();
  shuttle.action_complete_at.reset();

  const auto k = static_cast<std::size_t>(node);
  const int capacity = instance_->drivers_per_shuttle();
  if (state_.driver_count[k] > 0 && shuttle.onboard_drivers < capacity) {
    const int boarding = std::min(state_.driver_count[k], capacity - shuttle.onboard_drivers);
    state_.driver_count[k] -= boarding;
    shuttle.onboard_drivers += boarding;
  } else if (kind == ActionKind::Move && shuttle.onboard_drivers > 0 && is_droppable(node)) {
    const auto plan = relocation::plan_relocation(*instance_, *roles_, state_, node,
                                                  instance_->node(node).initial_charge);
    relocation::commit(plan, *roles_, state_);
    --shuttle.onboard_drivers;
  }
}

void Environment::update_parking() {
  if (!all_demand_fulfilled()) return;
  const bool unclaimed = any_unclaimed_driver_outside();
  for (ShuttleState& s : state_.shuttles) {
    if (s.busy() || s.parked || s.location != 0) continue;
    if (!unclaimed || s.onboard_drivers == instance_->drivers_per_shuttle()) s.parked = true;
  }
}

void Environment::update_done() {
  const bool parked = std::all_of(state_.shuttles.begin(), state_.shuttles.end(),
                                  [](const ShuttleState& s) { return s.parked; });
  done_ = parked && all_demand_fulfilled() && drivers_outside() == 0;
  if (!done_ && state_.steps >= max_steps_) {
    done_ = true;
    truncated_ = true;
  }
}

StepOutcome Environment::advance() {
  if (done_) throw ContractViolation("episode is over");
  if (!ready_shuttles().empty()) throw ContractViolation("every ready shuttle needs an action before advancing");

  double next = kNever;
  for (const ShuttleState& s : state_.shuttles)
    if (s.busy() && s.action_kind != ActionKind::Idle) next = std::min(next, *s.action_complete_at);
  if (!state_.pending_events.empty()) next = std::min(next, state_.pending_events.front().fire_at);
  if (next == kNever) throw std::logic_error("simulator deadlock: nothing left to wait for");
  for (ShuttleState& s : state_.shuttles)
    if (s.busy() && s.action_kind == ActionKind::Idle) s.action_complete_at = next;

  double now = kNever;
  for (const ShuttleState& s : state_.shuttles)
    if (s.busy()) now = std::min(now, *s.action_complete_at);

  while (!state_.pending_events.empty() && state_.pending_events.front().fire_at <= now) {
    const DelayedEvent event = state_.pending_events.front();
    state_.pending_events.erase(state_.pending_events.begin());
    fire(event);
  }

  const double reward = state_.clock - now;
  state_.clock = now;
  ++state_.steps;

  for (ShuttleState& s : state_.shuttles)
    if (s.busy() && *s.action_complete_at == now) complete_action(s);

  update_parking();
  update_done();
  return outcome(reward);
}

StepOutcome Environment::step(const std::map<int, int>& actions) {
  for (const auto& [shuttle, node] : actions) assign(shuttle, node);
  return advance();
}

StepOutcome Environment::outcome(double reward) const {
  StepOutcome out;
  out.reward = reward;
  out.clock = state_.clock;
  out.done = done_;
  out.truncated = truncated_;
  out.ready_shuttles = ready_shuttles();
  for (int s : out.ready_shuttles) out.masks[s] = legal_actions(s);
  return out;
}

Observation Environment::observe(int shuttle, bool with_distance) const {
  const ShuttleState& me = state_.shuttles.at(static_cast<std::size_t>(shuttle));
  const auto n = static_cast<Eigen::Index>(instance_->size());
  Observation obs;
  obs.shuttle = shuttle;
  obs.location = me.location;
  obs.static_features.resize(n, Observation::kStaticDim);
  obs.dynamic_features.resize(n, Observation::dynamic_dim(with_distance));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const Node& node = instance_->node(static_cast<int>(i));
    obs.static_features.row(i) << node.x, node.y, static_cast<double>(node.initial_charge);
    const double ev = (state_.ev_count[k] > 0 || state_.expected_ev[k]) ? 1.0 : 0.0;
    const double drivers = state_.driver_count[k] + (state_.expected_driver[k] ? 1.0 : 0.0);
    Eigen::Index c = 0;
    obs.dynamic_features(i, c++) = ev;
    obs.dynamic_features(i, c++) = drivers;
    if (with_distance) obs.dynamic_features(i, c++) = instance_->travel_minutes(me.location, static_cast<int>(i));
    obs.dynamic_features(i, c++) = me.onboard_drivers;
  }
  return obs;
}

int Environment::drivers_outside() const {
  // Every pending event belongs to exactly one EV travelling with its driver.
  return std::accumulate(state_.driver_count.begin(), state_.driver_count.end(), 0) +
         static_cast<int>(state_.pending_events.size());
}

int Environment::total_drivers() const {
  int onboard = 0;
  for (const ShuttleState& s : state_.shuttles) onboard += s.onboard_drivers;
  return onboard + drivers_outside();
}

int Environment::total_evs() const {
  int in_transit = 0;
  for (const DelayedEvent& e : state_.pending_events)
    in_transit += e.kind != EventKind::ChargingCompletes;
  return std::accumulate(state_.ev_count.begin(), state_.ev_count.end(), 0) + in_transit;
}

int Environment::max_ev_load() const {
  std::vector<int> load = state_.ev_count;
  for (const DelayedEvent& e : state_.pending_events)
    if (e.kind != EventKind::ChargingCompletes) ++load[static_cast<std::size_t>(e.node)];
  return load.empty() ? 0 : *std::max_element(load.begin(), load.end());
}

}  // namespace ffevss
