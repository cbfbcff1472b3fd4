#include "ffevss/trainer.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <set>

#include "ffevss/errors.hpp"
#include "json.hpp"

namespace ffevss {

using nlohmann::json;

namespace {

constexpr std::uint64_t kTrainingBit = std::uint64_t{1} << 63;

// Deterministic 64-bit mixing of several integers through std::seed_seq,
// whose output is fixed by the standard.
std::uint64_t mix(std::initializer_list<std::uint64_t> parts) {
  std::vector<std::uint32_t> words;
  for (std::uint64_t p : parts) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

enum Stream : std::uint64_t { kInstance = 1, kRollout = 2, kActorInit = 3, kCriticInit = 4 };

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void save_last_good(const TrainConfig& config, const ActorNet& actor, const CriticNet& critic, int epochs_done) {
  if (config.checkpoint_path.empty()) return;
  save_checkpoint(config.checkpoint_path, make_checkpoint(config, actor, critic, epochs_done));
}

}  // namespace

std::string_view to_string(AgentFlavor flavor) {
  switch (flavor) {
    case AgentFlavor::RL: return "rl";
    case AgentFlavor::GenRL: return "gen-rl";
    case AgentFlavor::NetRL: return "net-rl";
  }
  return "?";
}

AgentFlavor parse_flavor(std::string_view text) {
  if (text == "rl") return AgentFlavor::RL;
  if (text == "gen-rl") return AgentFlavor::GenRL;
  if (text == "net-rl") return AgentFlavor::NetRL;
  throw ConfigError("flavor: unknown value '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw ConfigError(std::string(name) + " must be positive, got " + std::to_string(v));
  };
  positive(epochs, "epochs");
  positive(batch_size, "batch_size");
  positive(num_shuttles, "num_shuttles");
  positive(drivers_per_shuttle, "drivers_per_shuttle");
  positive(embed_dim, "embed_dim");
  positive(hidden_dim, "hidden_dim");
  if (max_steps < 0) throw ConfigError("max_steps must be non-negative");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative");
  if (!(lr_actor > 0.0) || !(lr_critic > 0.0)) throw ConfigError("learning rates must be positive");
  if (clip_norm && !(*clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
  if (!(lr_final_fraction > 0.0) || lr_final_fraction > 1.0) throw ConfigError("lr_final_fraction must be in (0, 1]");
  if (sizes.empty() || difficulties.empty()) throw ConfigError("sizes and difficulties must be non-empty");
  for (int n : sizes) positive(n, "network size");
  switch (flavor) {
    case AgentFlavor::RL:
      if (sizes.size() != 1 || difficulties.size() != 1)
        throw ConfigError("flavor rl trains on exactly one size and one difficulty");
      break;
    case AgentFlavor::GenRL:
      if (sizes.size() != 1) throw ConfigError("flavor gen-rl trains on exactly one size");
      break;
    case AgentFlavor::NetRL:
      if (difficulties.size() != 1) throw ConfigError("flavor net-rl trains on exactly one difficulty");
      break;
  }
}

std::string to_json(const TrainConfig& c) {
  json j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["max_steps"] = c.max_steps;
  j["lr_actor"] = c.lr_actor;
  j["lr_critic"] = c.lr_critic;
  j["sizes"] = c.sizes;
  j["difficulties"] = json::array();
  for (Difficulty d : c.difficulties) j["difficulties"].push_back(std::string(to_string(d)));
  j["num_shuttles"] = c.num_shuttles;
  j["drivers_per_shuttle"] = c.drivers_per_shuttle;
  j["seed"] = c.seed;
  j["flavor"] = std::string(to_string(c.flavor));
  j["use_distance"] = c.use_distance;
  j["clip_norm"] = c.clip_norm ? json(*c.clip_norm) : json(nullptr);
  j["lr_final_fraction"] = c.lr_final_fraction;
  j["embed_dim"] = c.embed_dim;
  j["hidden_dim"] = c.hidden_dim;
  j["checkpoint_every"] = c.checkpoint_every;
  j["checkpoint_path"] = c.checkpoint_path;
  return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("train config: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("train config: expected a JSON object");
  static const std::set<std::string> known = {
      "epochs",      "batch_size", "max_steps", "lr_actor",     "lr_critic",    "sizes",
      "difficulties", "num_shuttles", "drivers_per_shuttle", "seed", "flavor", "use_distance",
      "clip_norm",   "lr_final_fraction", "embed_dim",  "hidden_dim", "checkpoint_every", "checkpoint_path"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("train config: unknown key '" + key + "'");

  TrainConfig c;
  try {
    if (j.contains("epochs")) c.epochs = j["epochs"].get<int>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
    if (j.contains("max_steps")) c.max_steps = j["max_steps"].get<int>();
    if (j.contains("lr_actor")) c.lr_actor = j["lr_actor"].get<double>();
    if (j.contains("lr_critic")) c.lr_critic = j["lr_critic"].get<double>();
    if (j.contains("sizes")) c.sizes = j["sizes"].get<std::vector<int>>();
    if (j.contains("difficulties")) {
      c.difficulties.clear();
      for (const auto& d : j["difficulties"]) c.difficulties.push_back(parse_difficulty(d.get<std::string>()));
    }
    if (j.contains("num_shuttles")) c.num_shuttles = j["num_shuttles"].get<int>();
    if (j.contains("drivers_per_shuttle")) c.drivers_per_shuttle = j["drivers_per_shuttle"].get<int>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("flavor")) c.flavor = parse_flavor(j["flavor"].get<std::string>());
    if (j.contains("use_distance")) c.use_distance = j["use_distance"].get<bool>();
    if (j.contains("clip_norm") && !j["clip_norm"].is_null()) c.clip_norm = j["clip_norm"].get<double>();
    if (j.contains("lr_final_fraction")) c.lr_final_fraction = j["lr_final_fraction"].get<double>();
    if (j.contains("embed_dim")) c.embed_dim = j["embed_dim"].get<int>();
    if (j.contains("hidden_dim")) c.hidden_dim = j["hidden_dim"].get<int>();
    if (j.contains("checkpoint_every")) c.checkpoint_every = j["checkpoint_every"].get<int>();
    if (j.contains("checkpoint_path")) c.checkpoint_path = j["checkpoint_path"].get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

void write_stats_csv(std::ostream& out, const std::vector<EpochStats>& stats) {
  out << "epoch,mean_R,mean_advantage,critic_loss,seconds\n";
  char buf[160];
  for (const EpochStats& s : stats) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.6f\n", s.epoch, s.mean_reward, s.mean_advantage,
                  s.critic_loss, s.seconds);
    out << buf;
  }
}

std::uint64_t training_seed(std::uint64_t seed, int epoch, int episode) {
  return mix({seed, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(episode), kInstance}) |
         kTrainingBit;
}

bool is_training_seed(std::uint64_t seed) { return (seed & kTrainingBit) != 0; }

NetworkInstance sample_training_instance(const TrainConfig& config, int epoch, int episode) {
  const std::uint64_t seed = training_seed(config.seed, epoch, episode);
  std::mt19937_64 pick(seed);
  const int n = config.sizes[std::uniform_int_distribution<std::size_t>(0, config.sizes.size() - 1)(pick)];
  const Difficulty level =
      config.difficulties[std::uniform_int_distribution<std::size_t>(0, config.difficulties.size() - 1)(pick)];
  return generate_instance(seed, n, level, config.num_shuttles, config.drivers_per_shuttle);
}

BatchGradients accumulate_batch(ActorNet& actor, CriticNet& critic, const std::vector<NetworkInstance>& batch,
                                std::uint64_t rollout_seed, int max_steps, double return_offset,
                                double value_offset) {
  BatchGradients out;
  const double m = static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto instance = std::make_shared<const NetworkInstance>(batch[i]);
    Environment env(instance, EnvOptions{max_steps});
    std::mt19937_64 rng(mix({rollout_seed, i, kRollout}));
    PolicyRollout rollout = rollout_fleet(actor, env, DecodeMode::Sample, rng);
    const double ret = rollout.trajectory.total_reward + return_offset;
    if (!std::isfinite(ret)) throw NumericError("non-finite episode return");

    nn::Tape critic_tape;
    const Eigen::MatrixXd x0 = env.observe(0, false).static_features;
    nn::Var v = critic.value(critic_tape, x0);
    const double value = v.scalar() + value_offset;
    if (!std::isfinite(value)) throw NumericError("non-finite critic value");
    const double advantage = ret - value;

    // Minimising -(A/M) log p ascends the policy gradient; the critic
    // minimises (R - V)^2 / M.
    if (rollout.log_prob_sum.valid()) {
      rollout.tape->backward(rollout.log_prob_sum, -advantage / m);
      rollout.tape->accumulate_into(actor.params());
    }
    critic_tape.backward(v, -2.0 * advantage / m);
    critic_tape.accumulate_into(critic.params());

    out.returns.push_back(ret);
    out.values.push_back(value);
    out.routes.push_back(dispatches(rollout.trajectory));
  }
  return out;
}

TrainResult train(const TrainConfig& config, const std::function<void(const EpochStats&)>& on_epoch) {
  config.validate();
  TrainResult result{ActorNet(config.actor_config(), mix({config.seed, kActorInit})),
                     CriticNet(config.critic_config(), mix({config.seed, kCriticInit})),
                     {}};
  nn::AdamOptions actor_opt, critic_opt;
  actor_opt.clip_norm = critic_opt.clip_norm = config.clip_norm;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double progress = config.epochs > 1 ? static_cast<double>(epoch) / (config.epochs - 1) : 0.0;
    const double scale = 1.0 - (1.0 - config.lr_final_fraction) * progress;
    actor_opt.lr = config.lr_actor * scale;
    critic_opt.lr = config.lr_critic * scale;
    const auto start = std::chrono::steady_clock::now();
    const ActorNet actor_before = result.actor;
    const CriticNet critic_before = result.critic;
    BatchGradients batch;
    try {
      result.actor.params().zero_grad();
      result.critic.params().zero_grad();
      std::vector<NetworkInstance> instances;
      instances.reserve(static_cast<std::size_t>(config.batch_size));
      for (int m = 0; m < config.batch_size; ++m) instances.push_back(sample_training_instance(config, epoch, m));
      batch = accumulate_batch(result.actor, result.critic, instances,
                               mix({config.seed, static_cast<std::uint64_t>(epoch), kRollout}), config.max_steps);
      nn::adam_update(result.actor.params(), actor_opt);
      nn::adam_update(result.critic.params(), critic_opt);
    } catch (const NumericError& e) {
      save_last_good(config, actor_before, critic_before, epoch);
      throw NumericError("epoch " + std::to_string(epoch) + ": " + e.what());
    }

    EpochStats s;
    s.epoch = epoch;
    const double m = static_cast<double>(batch.returns.size());
    for (std::size_t i = 0; i < batch.returns.size(); ++i) {
      const double a = batch.returns[i] - batch.values[i];
      s.mean_reward += batch.returns[i] / m;
      s.mean_advantage += a / m;
      s.critic_loss += a * a / m;
    }
    s.seconds = seconds_since(start);
    result.stats.push_back(s);
    if (on_epoch) on_epoch(s);
    if (config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0)
      save_last_good(config, result.actor, result.critic, epoch + 1);
  }
  save_last_good(config, result.actor, result.critic, config.epochs);
  return result;
}

nn::Checkpoint make_checkpoint(const TrainConfig& config, const ActorNet& actor, const CriticNet& critic,
                               int epochs_done) {
  nn::Checkpoint cp;
  json meta;
  meta["config"] = json::parse(to_json(config));
  meta["epochs_done"] = epochs_done;
  cp.metadata = meta.dump();
  cp.stores.emplace_back("actor", actor.params());
  cp.stores.emplace_back("critic", critic.params());
  return cp;
}

LoadedAgent load_agent(const std::filesystem::path& path) {
  const nn::Checkpoint cp = nn::load_checkpoint(path);
  json meta;
  try {
    meta = json::parse(cp.metadata);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": metadata: " + e.what());
  }
  if (!meta.contains("config") || !meta.contains("epochs_done"))
    throw ParseError(path.string() + ": metadata lacks config or epochs_done");
  const TrainConfig config = train_config_from_json(meta["config"].dump());
  return LoadedAgent{config, ActorNet(config.actor_config(), cp.store("actor")),
                     CriticNet(config.critic_config(), cp.store("critic")), meta["epochs_done"].get<int>()};
}

std::vector<NetworkInstance> evaluation_instances(int count, int n_nodes, Difficulty level, int num_shuttles,
                                                  int drivers_per_shuttle, std::uint64_t first_seed) {
  if (count < 0) throw ConfigError("instance count must be non-negative");
  std::vector<NetworkInstance> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const std::uint64_t seed = first_seed + static_cast<std::uint64_t>(i);
    if (is_training_seed(seed)) throw ConfigError("evaluation seed overlaps the training seed range");
    out.push_back(generate_instance(seed, n_nodes, level, num_shuttles, drivers_per_shuttle));
  }
  return out;
}

std::vector<ResultRow> evaluate(const std::string& method, const std::vector<NetworkInstance>& instances,
                                const EpisodeRunner& runner, int max_steps) {
  std::vector<ResultRow> rows;
  rows.reserve(instances.size());
  for (const NetworkInstance& inst : instances) {
    Environment env(std::make_shared<const NetworkInstance>(inst), EnvOptions{max_steps});
    const auto start = std::chrono::steady_clock::now();
    const Trajectory traj = runner(env);
    ResultRow row;
    row.seconds = seconds_since(start);
    row.seed = inst.seed();
    row.method = method;
    row.makespan = traj.makespan();
    row.decision_events = traj.decision_events;
    if (!traj.terminal) throw FeasibilityError(method + ": episode for seed " + std::to_string(inst.seed()) +
                                               " hit the step limit");
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ResultRow> evaluate(ActorNet& actor, const std::vector<NetworkInstance>& instances, int max_steps) {
  return evaluate("rl", instances,
                  [&actor](Environment& env) {
                    std::mt19937_64 unused(0);
                    return rollout_fleet(actor, env, DecodeMode::Greedy, unused).trajectory;
                  },
                  max_steps);
}

AblationResult ablate_distance_feature(const TrainConfig& config,
                                       const std::function<void(bool, const EpochStats&)>& on_epoch) {
  TrainConfig with = config, without = config;
  with.use_distance = true;
  without.use_distance = false;
  if (!config.checkpoint_path.empty()) {
    with.checkpoint_path = config.checkpoint_path + ".distance";
    without.checkpoint_path = config.checkpoint_path + ".no-distance";
  }
  auto relay = [&on_epoch](bool flag) {
    return [&on_epoch, flag](const EpochStats& s) {
      if (on_epoch) on_epoch(flag, s);
    };
  };
  TrainResult a = train(with, relay(true));
  TrainResult b = train(without, relay(false));
  return AblationResult{std::move(a), std::move(b)};
}

double final_mean_reward(const std::vector<EpochStats>& stats, int window) {
  if (stats.empty() || window <= 0) throw ContractViolation("final_mean_reward: no epochs");
  const std::size_t k = std::min(stats.size(), static_cast<std::size_t>(window));
  double total = 0.0;
  for (std::size_t i = stats.size() - k; i < stats.size(); ++i) total += stats[i].mean_reward;
  return total / static_cast<double>(k);
}

}  // namespace ffevss
