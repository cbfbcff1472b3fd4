#include "ffevss/relocation.hpp"

#include <algorithm>

#include "ffevss/errors.hpp"

namespace ffevss::relocation {

RoleIndex::RoleIndex(const NetworkInstance& instance)
    : chargers(instance.nodes_with_role(NodeRole::Charger)),
      demanders(instance.nodes_with_role(NodeRole::Demander)),
      charger_pos(static_cast<std::size_t>(instance.size()), -1),
      demander_pos(static_cast<std::size_t>(instance.size()), -1) {
  for (std::size_t k = 0; k < chargers.size(); ++k)
    charger_pos[static_cast<std::size_t>(chargers[k])] = static_cast<int>(k);
  for (std::size_t k = 0; k < demanders.size(); ++k)
    demander_pos[static_cast<std::size_t>(demanders[k])] = static_cast<int>(k);
}

DemandMatrix demand_matrix(const NetworkInstance& instance, const RoleIndex& roles,
                           const EnvState& state) {
  const auto n = static_cast<Eigen::Index>(instance.size());
  const auto m = static_cast<Eigen::Index>(roles.demanders.size());
  DemandMatrix out{Eigen::MatrixXd(n, m)};
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto pos = static_cast<std::size_t>(k);
    if (state.demand_open[pos] && !state.demand_claimed[pos])
      out.time_to_demander.col(k) = instance.travel_time().col(roles.demanders[pos]);
    else
      out.time_to_demander.col(k).setConstant(kBig);
  }
  return out;
}

Eigen::VectorXd charger_times(const NetworkInstance& instance, const RoleIndex& roles,
                              const EnvState& state, int from) {
  const auto m = static_cast<Eigen::Index>(roles.chargers.size());
  Eigen::VectorXd available(m), times(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto pos = static_cast<std::size_t>(k);
    available(k) = state.charger_available[pos] ? 1.0 : 0.0;
    times(k) = instance.travel_minutes(from, roles.chargers[pos]);
  }
  return available.cwiseProduct(times) + (1.0 - available.array()).matrix() * kBig;
}

int nearest_open(std::span<const double> row) {
  int best = -1;
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (row[k] >= kBig) continue;
    if (best < 0 || row[k] < row[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  }
  if (best < 0) throw InfeasibleRelocation("no open target left");
  return best;
}

namespace {

int nearest_demander(const DemandMatrix& dm, const RoleIndex& roles, int from) {
  const Eigen::VectorXd row = dm.time_to_demander.row(from).transpose();
  try {
    return roles.demanders[static_cast<std::size_t>(nearest_open({row.data(), static_cast<std::size_t>(row.size())}))];
  } catch (const InfeasibleRelocation&) {
    throw InfeasibleRelocation("no open demander for EV leaving node " + std::to_string(from));
  }
}

}  // namespace

RelocationPlan plan_relocation(const NetworkInstance& instance, const RoleIndex& roles,
                               const EnvState& state, int supplier, int ev_charge) {
  RelocationPlan plan;
  plan.supplier = supplier;
  plan.ev_charge = ev_charge;
  const DemandMatrix dm = demand_matrix(instance, roles, state);

  if (!instance.needs_charging(ev_charge)) {
    plan.demander = nearest_demander(dm, roles, supplier);
    plan.driver_eta = state.clock + quantize_minutes(instance.travel_minutes(supplier, plan.demander));
    plan.first_event = {plan.driver_eta, EventKind::EvArrivesAtDemander, plan.demander, true, ev_charge};
    return plan;
  }

  const Eigen::VectorXd to_chargers = charger_times(instance, roles, state, supplier);
  int pos = -1;
  try {
    pos = nearest_open({to_chargers.data(), static_cast<std::size_t>(to_chargers.size())});
  } catch (const InfeasibleRelocation&) {
    throw BlockedRelocation("no charger available for EV at node " + std::to_string(supplier));
  }
  const int charger = roles.chargers[static_cast<std::size_t>(pos)];
  plan.charger = charger;
  plan.demander = nearest_demander(dm, roles, charger);
  plan.charge_minutes = quantize_minutes(instance.charging_minutes(ev_charge));

  const double at_charger = state.clock + quantize_minutes(instance.travel_minutes(supplier, charger));
  plan.driver_eta = at_charger + plan.charge_minutes +
                    quantize_minutes(instance.travel_minutes(charger, plan.demander));
  plan.first_event = {at_charger, EventKind::EvArrivesAtCharger, charger, true, ev_charge,
                      plan.demander};
  return plan;
}

void schedule(EnvState& state, DelayedEvent event) {
  event.sequence = state.next_sequence++;
  auto it = std::upper_bound(state.pending_events.begin(), state.pending_events.end(), event,
                             fires_before);
  state.pending_events.insert(it, event);
}

void commit(const RelocationPlan& plan, const RoleIndex& roles, EnvState& state) {
  const auto s = static_cast<std::size_t>(plan.supplier);
  const auto d = static_cast<std::size_t>(plan.demander);
  state.ev_count[s] = 0;
  state.relocated[s] = true;

  state.demand_claimed[static_cast<std::size_t>(roles.demander_pos[d])] = true;
  state.expected_ev[d] = true;
  state.expected_driver[d] = true;
  state.driver_eta[d] = plan.driver_eta;

  if (plan.charger) {
    const auto c = static_cast<std::size_t>(*plan.charger);
    state.charger_available[static_cast<std::size_t>(roles.charger_pos[c])] = false;
    state.expected_ev[c] = true;
  }
  schedule(state, plan.first_event);
}

}  // namespace ffevss::relocation
