#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ffevss/environment.hpp"
#include "ffevss/nn/layers.hpp"
#include "ffevss/nn/params.hpp"
#include "ffevss/nn/tape.hpp"
#include "ffevss/trajectory.hpp"

namespace ffevss {

enum class DecodeMode { Sample, Greedy };

struct ActorConfig {
  int embed_dim = 128;
  int hidden_dim = 128;  // LSTM state and attention width
  bool use_distance = true;

  bool operator==(const ActorConfig&) const = default;
};

struct CriticConfig {
  int embed_dim = 128;
  int hidden_dim = 128;  // attention width and feed-forward head
  int glimpses = 3;

  bool operator==(const CriticConfig&) const = default;
};

/// Pointer-style actor: affine static and dynamic node embeddings, an LSTM
/// decoder fed with the static embedding of the last dispatched node, and
/// additive attention over [static; dynamic; hidden] producing one logit
/// per node.
class ActorNet {
 public:
  ActorNet(ActorConfig config, std::uint64_t seed);
  /// Adopts trained parameters; throws ConfigError on missing or misshaped tensors.
  ActorNet(ActorConfig config, nn::ParamStore params);

  const ActorConfig& config() const { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  int dynamic_dim() const { return Observation::dynamic_dim(config_.use_distance); }

 private:
  ActorConfig config_;
  nn::ParamStore params_;
};

/// State-value network on the initial static features: node embedding,
/// repeated attention glimpses from a zero query, and a ReLU head.
class CriticNet {
 public:
  CriticNet(CriticConfig config, std::uint64_t seed);
  CriticNet(CriticConfig config, nn::ParamStore params);

  const CriticConfig& config() const { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  /// V(x0) recorded on `tape` as a 1 x 1 value.
  nn::Var value(nn::Tape& tape, const Eigen::MatrixXd& static_features);
  double value(const Eigen::MatrixXd& static_features);

 private:
  CriticConfig config_;
  nn::ParamStore params_;
};

/// Draws an index from `probs` by inverse CDF; zero entries are never drawn.
int sample_index(const Eigen::VectorXd& probs, std::mt19937_64& rng);
/// Highest-probability legal index, ties to the lowest index.
int argmax_legal(const Eigen::VectorXd& logits, const std::vector<int>& legal);

/// One episode of actor decoding on a tape. The decoder state is shared
/// by every shuttle and consumes the global dispatch sequence.
class ActorSession {
 public:
  struct Choice {
    int node = -1;
    double log_prob = 0.0;
    Eigen::VectorXd probabilities;  // empty when the choice was forced
    nn::Var log_prob_var;           // invalid when the choice was forced
  };

  ActorSession(ActorNet& actor, nn::Tape& tape);

  Choice act(const Observation& obs, const std::vector<int>& legal, DecodeMode mode, std::mt19937_64& rng);
  /// Scores a prescribed action, advancing the decoder as act() would.
  Choice score(const Observation& obs, const std::vector<int>& legal, int node);

  /// Sum of recorded log-probabilities; invalid when every choice was forced.
  nn::Var log_prob_sum() const { return log_prob_sum_; }
  int last_node() const { return last_node_; }

 private:
  Choice decide(const Observation& obs, const std::vector<int>& legal, int forced, DecodeMode mode,
                std::mt19937_64* rng);
  void prepare(const Observation& obs);

  ActorNet& actor_;
  nn::Tape& tape_;
  bool prepared_ = false;
  nn::Var static_embed_;
  nn::Var static_proj_;
  nn::Var attn_dynamic_;
  nn::Var attn_hidden_;
  nn::LstmVars state_;
  int last_node_ = 0;
  nn::Var log_prob_sum_;
};

struct PolicyRollout {
  Trajectory trajectory;
  std::unique_ptr<nn::Tape> tape;
  nn::Var log_prob_sum;  // invalid when no choice was stochastic
};

/// Decodes a whole episode; observations are kept in the records.
PolicyRollout rollout_fleet(ActorNet& actor, Environment& env, DecodeMode mode, std::mt19937_64& rng);
/// rollout_fleet restricted to single-shuttle instances.
PolicyRollout rollout_single(ActorNet& actor, Environment& env, DecodeMode mode, std::mt19937_64& rng);
/// Re-scores a recorded dispatch sequence on a fresh tape.
PolicyRollout replay_policy(ActorNet& actor, Environment& env, const std::vector<std::pair<int, int>>& dispatches);

double value(CriticNet& critic, const Eigen::MatrixXd& static_features);

}  // namespace ffevss
