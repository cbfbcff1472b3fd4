#pragma once

#include <memory>
#include <vector>

#include "ffevss/environment.hpp"
#include "ffevss/instance.hpp"

namespace ffevss::testing {

inline Node depot(double x, double y) { return {0, x, y, NodeRole::Depot, 0}; }
inline Node supplier(int id, double x, double y, int charge) { return {id, x, y, NodeRole::Supplier, charge}; }
inline Node demander(int id, double x, double y) { return {id, x, y, NodeRole::Demander, 0}; }
inline Node charger(int id, double x, double y) { return {id, x, y, NodeRole::Charger, 0}; }

inline std::shared_ptr<const NetworkInstance> scripted(std::vector<Node> nodes, int shuttles = 1, int drivers = 3) {
  return std::make_shared<const NetworkInstance>(std::move(nodes), FleetSpec{shuttles, drivers});
}

inline std::shared_ptr<const NetworkInstance> generated(std::uint64_t seed, int n, Difficulty level, int shuttles = 1,
                                                        int drivers = 3) {
  return std::make_shared<const NetworkInstance>(generate_instance(seed, n, level, shuttles, drivers));
}

/// Minutes for `miles` at the default 45 mph.
inline double minutes(double miles) { return miles / 45.0 * 60.0; }

}  // namespace ffevss::testing
