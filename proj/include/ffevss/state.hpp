#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace ffevss {

/// Simulation time lives on a dyadic grid (2^-20 minute, about 57 us) so
/// that sums and differences of event times are exact in double precision.
/// This is what makes the negated reward sum equal the final clock bitwise.
inline double quantize_minutes(double minutes) {
  return std::ldexp(std::nearbyint(std::ldexp(minutes, 20)), -20);
}

inline constexpr double kNever = std::numeric_limits<double>::infinity();

enum class EventKind { EvArrivesAtCharger, ChargingCompletes, EvArrivesAtDemander };

/// A deterministic transition that fires after the decision that caused it.
struct DelayedEvent {
  double fire_at = 0.0;
  EventKind kind = EventKind::EvArrivesAtDemander;
  int node = 0;
  bool driver_attached = true;
  int ev_charge = 0;
  int next_node = -1;  // demander reached after charging (ChargingCompletes only)
  std::uint64_t sequence = 0;

  bool operator==(const DelayedEvent&) const = default;
};

/// Fire order: time, then node index, then creation order.
inline bool fires_before(const DelayedEvent& a, const DelayedEvent& b) {
  if (a.fire_at != b.fire_at) return a.fire_at < b.fire_at;
  if (a.node != b.node) return a.node < b.node;
  return a.sequence < b.sequence;
}

enum class ActionKind { Move, Wait, Idle };

struct ShuttleState {
  int shuttle_id = 0;
  int location = 0;
  int onboard_drivers = 0;
  std::optional<int> current_action;
  std::optional<double> action_complete_at;
  ActionKind action_kind = ActionKind::Move;
  bool parked = false;

  bool busy() const { return current_action.has_value(); }
  bool operator==(const ShuttleState&) const = default;
};

/// Full dynamic state of the network. Per-node vectors are indexed by node
/// id; charger and demander vectors are indexed by position in the
/// instance's charger / demander lists.
struct EnvState {
  double clock = 0.0;
  std::vector<int> ev_count;
  std::vector<int> driver_count;
  std::vector<bool> expected_ev;
  std::vector<bool> expected_driver;
  std::vector<double> driver_eta;  // arrival time of the expected driver, kNever if none
  std::vector<bool> relocated;     // supplier EV already handed to a driver

  std::vector<bool> charger_available;
  std::vector<int> charger_uses;
  std::vector<bool> demand_open;     // no EV has arrived yet
  std::vector<bool> demand_claimed;  // some EV is already heading there

  std::vector<DelayedEvent> pending_events;  // sorted by fires_before
  std::vector<ShuttleState> shuttles;
  std::uint64_t next_sequence = 0;
  int steps = 0;

  bool operator==(const EnvState&) const = default;
};

}  // namespace ffevss
