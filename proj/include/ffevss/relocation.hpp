#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ffevss/instance.hpp"
#include "ffevss/state.hpp"

namespace ffevss::relocation {

/// Sentinel travel time for demanders / chargers that can no longer be
/// chosen.
inline constexpr double kBig = 1e9;

/// Position of every charger and demander inside the availability vectors.
struct RoleIndex {
  std::vector<int> chargers;
  std::vector<int> demanders;
  std::vector<int> charger_pos;   // node id -> position, -1 if not a charger
  std::vector<int> demander_pos;  // node id -> position, -1 if not a demander

  explicit RoleIndex(const NetworkInstance& instance);
};

/// Travel time from every node to every demander; columns of demanders that
/// are fulfilled or already claimed hold kBig.
struct DemandMatrix {
  Eigen::MatrixXd time_to_demander;
};

DemandMatrix demand_matrix(const NetworkInstance& instance, const RoleIndex& roles,
                           const EnvState& state);

/// Travel time from `from` to each charger, kBig where the charger is taken.
/// Computed as the availability vector applied to the travel-time row.
Eigen::VectorXd charger_times(const NetworkInstance& instance, const RoleIndex& roles,
                              const EnvState& state, int from);

/// argmin over non-sentinel entries, ties to the lowest index.
/// Throws InfeasibleRelocation when every entry is a sentinel.
int nearest_open(std::span<const double> row);

struct RelocationPlan {
  int supplier = 0;
  int ev_charge = 0;
  std::optional<int> charger;
  int demander = 0;
  double charge_minutes = 0.0;  // quantized; 0 without a charger
  double driver_eta = 0.0;      // when the driver (with EV) reaches the demander
  DelayedEvent first_event;     // sequence left for the environment to stamp
};

/// Threshold rule: EVs above the threshold go straight to the nearest open
/// demander, others to the nearest free charger and from there to the
/// demander nearest that charger. Demander and charger are claimed at plan
/// time. Throws InfeasibleRelocation / BlockedRelocation.
RelocationPlan plan_relocation(const NetworkInstance& instance, const RoleIndex& roles,
                               const EnvState& state, int supplier, int ev_charge);

/// Applies the claims of `plan` and schedules its first event.
void commit(const RelocationPlan& plan, const RoleIndex& roles, EnvState& state);

/// Inserts an event keeping fire order.
void schedule(EnvState& state, DelayedEvent event);

}  // namespace ffevss::relocation
