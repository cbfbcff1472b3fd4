#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ffevss/instance.hpp"
#include "ffevss/nn/checkpoint.hpp"
#include "ffevss/policy.hpp"
#include "ffevss/results.hpp"

namespace ffevss {

/// RL trains on one (size, difficulty) cell, gen-RL mixes difficulties and
/// net-RL mixes network sizes.
enum class AgentFlavor { RL, GenRL, NetRL };

std::string_view to_string(AgentFlavor flavor);
AgentFlavor parse_flavor(std::string_view text);

struct TrainConfig {
  int epochs = 1000;
  int batch_size = 64;
  int max_steps = 0;  // 0 selects 10 x network size
  double lr_actor = 1e-4;
  double lr_critic = 1e-4;
  std::vector<int> sizes{23};
  std::vector<Difficulty> difficulties{Difficulty::Easy};
  int num_shuttles = 1;
  int drivers_per_shuttle = 3;
  std::uint64_t seed = 1;
  AgentFlavor flavor = AgentFlavor::RL;
  bool use_distance = true;
  std::optional<double> clip_norm;
  double lr_final_fraction = 1.0;  // learning rates anneal linearly to this fraction by the last epoch
  int embed_dim = 128;
  int hidden_dim = 128;
  int checkpoint_every = 0;  // 0 disables periodic checkpoints
  std::string checkpoint_path;

  /// Throws ConfigError on non-positive counts or a flavor/mixture mismatch.
  void validate() const;
  ActorConfig actor_config() const { return {embed_dim, hidden_dim, use_distance}; }
  CriticConfig critic_config() const { return {embed_dim, hidden_dim, 3}; }

  bool operator==(const TrainConfig&) const = default;
};

std::string to_json(const TrainConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const std::string& text);

/// One row per epoch. CSV header: epoch,mean_R,mean_advantage,critic_loss,seconds
struct EpochStats {
  int epoch = 0;
  double mean_reward = 0.0;
  double mean_advantage = 0.0;
  double critic_loss = 0.0;
  double seconds = 0.0;
};

void write_stats_csv(std::ostream& out, const std::vector<EpochStats>& stats);

struct TrainResult {
  ActorNet actor;
  CriticNet critic;
  std::vector<EpochStats> stats;
};

/// Instance seed for episode `episode` of epoch `epoch`. The top bit is
/// always set, which keeps training data apart from evaluation seeds.
std::uint64_t training_seed(std::uint64_t seed, int epoch, int episode);
/// True for seeds that training can produce.
bool is_training_seed(std::uint64_t seed);
NetworkInstance sample_training_instance(const TrainConfig& config, int epoch, int episode);

/// REINFORCE with a learned baseline. Each epoch rolls out batch_size
/// sampled episodes, then applies one Adam step to the actor with
/// (1/M) sum (R - V) grad log p and one to the critic with
/// (1/M) sum grad (R - V)^2. A non-finite loss or gradient aborts with
/// NumericError after saving the last good state when a checkpoint path
/// is configured.
TrainResult train(const TrainConfig& config, const std::function<void(const EpochStats&)>& on_epoch = {});

/// Gradient contributions of one batch, without the optimizer step.
/// Exposed for the baseline and direction checks.
struct BatchGradients {
  std::vector<double> returns;
  std::vector<double> values;
  std::vector<std::vector<std::pair<int, int>>> routes;  // sampled dispatches per episode
};
BatchGradients accumulate_batch(ActorNet& actor, CriticNet& critic, const std::vector<NetworkInstance>& batch,
                                std::uint64_t rollout_seed, int max_steps = 0, double return_offset = 0.0,
                                double value_offset = 0.0);

nn::Checkpoint make_checkpoint(const TrainConfig& config, const ActorNet& actor, const CriticNet& critic,
                               int epochs_done);
struct LoadedAgent {
  TrainConfig config;
  ActorNet actor;
  CriticNet critic;
  int epochs_done = 0;
};
LoadedAgent load_agent(const std::filesystem::path& path);

/// Held-out instances with seeds first_seed, first_seed + 1, ... (top bit clear).
std::vector<NetworkInstance> evaluation_instances(int count, int n_nodes, Difficulty level, int num_shuttles,
                                                  int drivers_per_shuttle, std::uint64_t first_seed = 1'000'000);

using EpisodeRunner = std::function<Trajectory(Environment&)>;
/// Runs `runner` on a fresh environment per instance and records one row each.
std::vector<ResultRow> evaluate(const std::string& method, const std::vector<NetworkInstance>& instances,
                                const EpisodeRunner& runner, int max_steps = 0);
/// Greedy decoding of `actor`, method "rl".
std::vector<ResultRow> evaluate(ActorNet& actor, const std::vector<NetworkInstance>& instances, int max_steps = 0);

struct AblationResult {
  TrainResult with_distance;
  TrainResult without_distance;
};
/// Twin runs that differ only in the distance feature.
AblationResult ablate_distance_feature(const TrainConfig& config,
                                       const std::function<void(bool, const EpochStats&)>& on_epoch = {});

/// Mean reward over the last `window` epochs.
double final_mean_reward(const std::vector<EpochStats>& stats, int window = 20);

}  // namespace ffevss
