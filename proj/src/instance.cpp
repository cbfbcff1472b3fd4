#include "ffevss/instance.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "ffevss/errors.hpp"
#include "json.hpp"

namespace ffevss {

using nlohmann::json;

std::string_view to_string(NodeRole role) {
  switch (role) {
    case NodeRole::Depot: return "depot";
    case NodeRole::Supplier: return "supplier";
    case NodeRole::Demander: return "demander";
    case NodeRole::Charger: return "charger";
  }
  return "unknown";
}

std::string_view to_string(Difficulty level) {
  switch (level) {
    case Difficulty::Easy: return "easy";
    case Difficulty::Medium: return "medium";
    case Difficulty::Hard: return "hard";
  }
  return "unknown";
}

NodeRole parse_role(std::string_view text) {
  if (text == "depot") return NodeRole::Depot;
  if (text == "supplier") return NodeRole::Supplier;
  if (text == "demander") return NodeRole::Demander;
  if (text == "charger") return NodeRole::Charger;
  throw ParseError("role: unknown value '" + std::string(text) + "'");
}

Difficulty parse_difficulty(std::string_view text) {
  if (text == "easy") return Difficulty::Easy;
  if (text == "medium") return Difficulty::Medium;
  if (text == "hard") return Difficulty::Hard;
  throw ConfigError("difficulty: unknown value '" + std::string(text) + "'");
}

namespace {

// {demanders, chargers, suppliers, needs_charge} per difficulty.
using TableRow = std::array<RoleCounts, 3>;
constexpr TableRow kRow23{{{7, 7, 8, 4}, {7, 7, 8, 8}, {8, 6, 8, 8}}};
constexpr TableRow kRow50{{{16, 16, 17, 8}, {16, 16, 17, 17}, {17, 15, 17, 17}}};
constexpr TableRow kRow100{{{33, 33, 33, 16}, {33, 33, 33, 33}, {33, 32, 34, 34}}};

RoleCounts scaled_counts(int n_nodes, Difficulty level) {
  const RoleCounts base = kRow23[static_cast<std::size_t>(level)];
  const double scale = static_cast<double>(n_nodes) / 23.0;
  const int free_nodes = n_nodes - 1;

  RoleCounts c;
  c.demanders = std::max(1, static_cast<int>(std::lround(base.demanders * scale)));
  c.chargers = std::max(1, static_cast<int>(std::lround(base.chargers * scale)));
  c.suppliers = free_nodes - c.demanders - c.chargers;
  while (c.suppliers < c.demanders && c.chargers > 1) {
    --c.chargers;
    ++c.suppliers;
  }
  while (c.suppliers < c.demanders && c.demanders > 1) {
    --c.demanders;
    ++c.suppliers;
  }
  if (c.suppliers < c.demanders)
    throw ConfigError("n_nodes " + std::to_string(n_nodes) + " too small for any EV relocation");

  switch (level) {
    case Difficulty::Easy:
      c.needs_charge = static_cast<int>(std::lround(base.needs_charge * scale));
      c.needs_charge = std::clamp(c.needs_charge, 0, std::min(c.suppliers, c.chargers - 1));
      break;
    case Difficulty::Medium:
      c.needs_charge = c.suppliers;
      break;
    case Difficulty::Hard:
      c.needs_charge = c.suppliers;
      if (c.chargers >= c.needs_charge) {
        const int excess = c.chargers - (c.needs_charge - 1);
        c.chargers -= excess;
        c.suppliers += excess;
        c.needs_charge = c.suppliers;
      }
      if (c.chargers < 1)
        throw ConfigError("n_nodes " + std::to_string(n_nodes) + " too small for a hard instance");
      break;
  }
  return c;
}

Eigen::MatrixXd euclidean_minutes(const std::vector<Node>& nodes, double speed_mph) {
  const auto n = static_cast<Eigen::Index>(nodes.size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const auto& a = nodes[static_cast<std::size_t>(i)];
      const auto& b = nodes[static_cast<std::size_t>(j)];
      const double miles = std::hypot(a.x - b.x, a.y - b.y);
      t(i, j) = t(j, i) = miles / speed_mph * 60.0;
    }
  }
  return t;
}

}  // namespace

RoleCounts role_counts(int n_nodes, Difficulty level) {
  const auto idx = static_cast<std::size_t>(level);
  switch (n_nodes) {
    case 23: return kRow23[idx];
    case 50: return kRow50[idx];
    case 100: return kRow100[idx];
    default: break;
  }
  if (n_nodes < 4) throw ConfigError("n_nodes must be at least 4, got " + std::to_string(n_nodes));
  return scaled_counts(n_nodes, level);
}

NetworkInstance::NetworkInstance(std::vector<Node> nodes, FleetSpec fleet, std::uint64_t seed,
                                 double speed_mph, int charge_threshold, int charge_target)
    : nodes_(std::move(nodes)),
      fleet_(fleet),
      seed_(seed),
      speed_mph_(speed_mph),
      charge_threshold_(charge_threshold),
      charge_target_(charge_target) {
  if (nodes_.empty() || nodes_.front().role != NodeRole::Depot)
    throw ValidationError("node 0 must be the depot");
  if (!(speed_mph_ > 0.0)) throw ValidationError("speed_mph must be positive");
  if (charge_threshold_ < 0 || charge_target_ <= charge_threshold_)
    throw ValidationError("charge_target must exceed charge_threshold");
  if (fleet_.num_shuttles < 1 || fleet_.drivers_per_shuttle < 1)
    throw ValidationError("fleet needs at least one shuttle and one driver");

  int depots = 0, suppliers = 0, demanders = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.id != static_cast<int>(i))
      throw ValidationError("node ids must equal their position (node " + std::to_string(i) + ")");
    if (!(n.x >= 0.0 && n.x <= 1.0 && n.y >= 0.0 && n.y <= 1.0))
      throw ValidationError("node " + std::to_string(i) + " lies outside the unit square");
    const bool supplier = n.role == NodeRole::Supplier;
    if (supplier && (n.initial_charge < 1 || n.initial_charge > charge_target_))
      throw ValidationError("supplier " + std::to_string(i) + " needs a charge in 1.." +
                            std::to_string(charge_target_));
    if (!supplier && n.initial_charge != 0)
      throw ValidationError("node " + std::to_string(i) + " holds charge but is not a supplier");
    depots += n.role == NodeRole::Depot;
    suppliers += supplier;
    demanders += n.role == NodeRole::Demander;
  }
  if (depots != 1) throw ValidationError("exactly one depot required");
  if (demanders > suppliers) throw ValidationError("more demanders than suppliers");

  travel_time_ = euclidean_minutes(nodes_, speed_mph_);
  const auto n = travel_time_.rows();
  per_level_charge_time_ = n > 1 ? travel_time_.sum() / static_cast<double>(n * (n - 1)) : 0.0;
}

double NetworkInstance::charging_minutes(int charge) const {
  return static_cast<double>(charge_target_ - charge) * per_level_charge_time_;
}

std::vector<int> NetworkInstance::nodes_with_role(NodeRole role) const {
  std::vector<int> out;
  for (const Node& n : nodes_)
    if (n.role == role) out.push_back(n.id);
  return out;
}

RoleCounts NetworkInstance::counts() const {
  RoleCounts c;
  for (const Node& n : nodes_) {
    c.demanders += n.role == NodeRole::Demander;
    c.chargers += n.role == NodeRole::Charger;
    if (n.role == NodeRole::Supplier) {
      ++c.suppliers;
      c.needs_charge += needs_charging(n.initial_charge);
    }
  }
  return c;
}

NetworkInstance NetworkInstance::with_fleet(FleetSpec fleet) const {
  return NetworkInstance(nodes_, fleet, seed_, speed_mph_, charge_threshold_, charge_target_);
}

bool NetworkInstance::operator==(const NetworkInstance& other) const {
  return nodes_ == other.nodes_ && fleet_.num_shuttles == other.fleet_.num_shuttles &&
         fleet_.drivers_per_shuttle == other.fleet_.drivers_per_shuttle && seed_ == other.seed_ &&
         speed_mph_ == other.speed_mph_ && charge_threshold_ == other.charge_threshold_ &&
         charge_target_ == other.charge_target_ && travel_time_ == other.travel_time_ &&
         per_level_charge_time_ == other.per_level_charge_time_;
}

NetworkInstance generate_instance(std::uint64_t seed, int n_nodes, Difficulty level,
                                  int num_shuttles, int drivers_per_shuttle) {
  if (num_shuttles < 1 || drivers_per_shuttle < 1)
    throw ConfigError("fleet needs at least one shuttle and one driver per shuttle");
  const RoleCounts counts = role_counts(n_nodes, level);
  if (counts.demanders + counts.chargers + counts.suppliers != n_nodes - 1)
    throw ConfigError("role counts do not cover the network");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(0.0, 1.0);

  std::vector<Node> nodes(static_cast<std::size_t>(n_nodes));
  for (int i = 0; i < n_nodes; ++i) {
    auto& n = nodes[static_cast<std::size_t>(i)];
    n.id = i;
    n.x = coord(rng);
    n.y = coord(rng);
  }

  std::vector<NodeRole> roles;
  roles.insert(roles.end(), static_cast<std::size_t>(counts.demanders), NodeRole::Demander);
  roles.insert(roles.end(), static_cast<std::size_t>(counts.chargers), NodeRole::Charger);
  roles.insert(roles.end(), static_cast<std::size_t>(counts.suppliers), NodeRole::Supplier);
  std::shuffle(roles.begin(), roles.end(), rng);
  for (std::size_t i = 1; i < nodes.size(); ++i) nodes[i].role = roles[i - 1];

  // Choose which suppliers fall at or below the threshold, then draw levels
  // uniformly inside the allowed band.
  std::vector<std::size_t> supplier_ids;
  for (std::size_t i = 1; i < nodes.size(); ++i)
    if (nodes[i].role == NodeRole::Supplier) supplier_ids.push_back(i);
  std::shuffle(supplier_ids.begin(), supplier_ids.end(), rng);
  const int threshold = NetworkInstance::kDefaultThreshold;
  const int target = NetworkInstance::kDefaultTarget;
  std::uniform_int_distribution<int> low(1, threshold);
  std::uniform_int_distribution<int> high(threshold + 1, target);
  for (std::size_t k = 0; k < supplier_ids.size(); ++k) {
    const bool charge = static_cast<int>(k) < counts.needs_charge;
    nodes[supplier_ids[k]].initial_charge = charge ? low(rng) : high(rng);
  }

  return NetworkInstance(std::move(nodes), {num_shuttles, drivers_per_shuttle}, seed);
}

namespace {

template <typename T>
T field(const json& j, const char* name) {
  if (!j.contains(name)) throw ParseError(std::string(name) + " absent");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string(name) + ": " + e.what());
  }
}

}  // namespace

std::string to_json(const NetworkInstance& instance) {
  json j;
  json nodes = json::array();
  for (const Node& n : instance.nodes()) {
    nodes.push_back({{"id", n.id},
                     {"x", n.x},
                     {"y", n.y},
                     {"role", std::string(to_string(n.role))},
                     {"charge", n.initial_charge}});
  }
  j["nodes"] = std::move(nodes);
  j["speed_mph"] = instance.speed_mph();
  j["charge_threshold"] = instance.charge_threshold();
  j["charge_target"] = instance.charge_target();
  j["num_shuttles"] = instance.num_shuttles();
  j["drivers_per_shuttle"] = instance.drivers_per_shuttle();
  j["seed"] = instance.seed();
  json matrix = json::array();
  const auto& t = instance.travel_time();
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < t.cols(); ++k) row.push_back(t(i, k));
    matrix.push_back(std::move(row));
  }
  j["travel_time"] = std::move(matrix);
  return j.dump(1);
}

NetworkInstance instance_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("instance: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("instance: expected a JSON object");

  const json node_list = field<json>(j, "nodes");
  if (!node_list.is_array()) throw ParseError("nodes: expected an array");
  std::vector<Node> nodes;
  for (const json& jn : node_list) {
    Node n;
    n.id = field<int>(jn, "id");
    n.x = field<double>(jn, "x");
    n.y = field<double>(jn, "y");
    n.role = parse_role(field<std::string>(jn, "role"));
    n.initial_charge = field<int>(jn, "charge");
    nodes.push_back(n);
  }
  const FleetSpec fleet{field<int>(j, "num_shuttles"), field<int>(j, "drivers_per_shuttle")};
  const auto matrix = field<std::vector<std::vector<double>>>(j, "travel_time");

  NetworkInstance instance(std::move(nodes), fleet, field<std::uint64_t>(j, "seed"),
                           field<double>(j, "speed_mph"), field<int>(j, "charge_threshold"),
                           field<int>(j, "charge_target"));

  const auto n = static_cast<std::size_t>(instance.size());
  if (matrix.size() != n) throw ValidationError("travel_time: expected " + std::to_string(n) + " rows");
  for (const auto& row : matrix)
    if (row.size() != n) throw ValidationError("travel_time: row length mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      if (matrix[i][k] != matrix[k][i])
        throw ValidationError("travel_time: asymmetric at (" + std::to_string(i) + "," +
                              std::to_string(k) + ")");
      const double expected = instance.travel_minutes(static_cast<int>(i), static_cast<int>(k));
      if (std::abs(matrix[i][k] - expected) > 1e-9 * std::max(1.0, std::abs(expected)))
        throw ValidationError("travel_time: entry (" + std::to_string(i) + "," + std::to_string(k) +
                              ") disagrees with node coordinates");
    }
  }
  return instance;
}

void save_instance(const NetworkInstance& instance, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  out << to_json(instance) << '\n';
}

NetworkInstance load_instance(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return instance_from_json(buffer.str());
}

}  // namespace ffevss
