#include "ffevss/policy.hpp"

#include <cmath>
#include <limits>

#include "ffevss/errors.hpp"

namespace ffevss {

namespace {

struct Shape {
  const char* name;
  Eigen::Index rows;
  Eigen::Index cols;
  bool bias;
};

std::vector<Shape> actor_shapes(const ActorConfig& c) {
  const Eigen::Index e = c.embed_dim, h = c.hidden_dim;
  return {{"static.W", e, Observation::kStaticDim, false},
          {"static.b", e, 1, true},
          {"dynamic.W", e, Observation::dynamic_dim(c.use_distance), false},
          {"dynamic.b", e, 1, true},
          {"lstm.W_ih", 4 * h, e, false},
          {"lstm.W_hh", 4 * h, h, false},
          {"lstm.b", 4 * h, 1, true},
          {"attn.W", h, 2 * e + h, false},
          {"attn.v", 1, h, false}};
}

std::vector<Shape> critic_shapes(const CriticConfig& c) {
  const Eigen::Index e = c.embed_dim, h = c.hidden_dim;
  return {{"critic.embed.W", e, Observation::kStaticDim, false},
          {"critic.embed.b", e, 1, true},
          {"critic.attn.W", h, 2 * e, false},
          {"critic.attn.v", 1, h, false},
          {"critic.head.W1", h, e, false},
          {"critic.head.b1", h, 1, true},
          {"critic.head.W2", 1, h, false},
          {"critic.head.b2", 1, 1, true}};
}

nn::ParamStore build(const std::vector<Shape>& shapes, std::uint64_t seed) {
  nn::ParamStore store(seed);
  for (const Shape& s : shapes) {
    if (s.bias)
      store.add_bias(s.name, s.rows, s.cols);
    else
      store.add_weight(s.name, s.rows, s.cols);
  }
  return store;
}

void check_shapes(const std::vector<Shape>& shapes, const nn::ParamStore& store) {
  if (store.size() != shapes.size())
    throw ConfigError("parameter count " + std::to_string(store.size()) + ", expected " +
                      std::to_string(shapes.size()));
  for (const Shape& s : shapes) {
    if (!store.contains(s.name)) throw ConfigError(std::string("missing parameter ") + s.name);
    const nn::Matrix& v = store[std::string_view(s.name)].value;
    if (v.rows() != s.rows || v.cols() != s.cols)
      throw ConfigError(std::string("parameter ") + s.name + " has shape " + std::to_string(v.rows()) + "x" +
                        std::to_string(v.cols()) + ", expected " + std::to_string(s.rows) + "x" +
                        std::to_string(s.cols));
  }
}

}  // namespace

ActorNet::ActorNet(ActorConfig config, std::uint64_t seed)
    : config_(config), params_(build(actor_shapes(config), seed)) {}

ActorNet::ActorNet(ActorConfig config, nn::ParamStore params) : config_(config), params_(std::move(params)) {
  check_shapes(actor_shapes(config_), params_);
}

CriticNet::CriticNet(CriticConfig config, std::uint64_t seed)
    : config_(config), params_(build(critic_shapes(config), seed)) {}

CriticNet::CriticNet(CriticConfig config, nn::ParamStore params) : config_(config), params_(std::move(params)) {
  check_shapes(critic_shapes(config_), params_);
}

nn::Var CriticNet::value(nn::Tape& tape, const Eigen::MatrixXd& static_features) {
  if (static_features.cols() != Observation::kStaticDim) throw ContractViolation("critic: static feature width");
  const Eigen::Index e = config_.embed_dim;
  nn::Var nodes = nn::embed(tape.constant(static_features), tape.param(params_, "critic.embed.W"),
                            tape.param(params_, "critic.embed.b"));
  nn::Var w = tape.param(params_, "critic.attn.W");
  nn::Var v = tape.param(params_, "critic.attn.v");
  nn::Var node_proj = nn::matmul_nt(nodes, nn::col_block(w, 0, e));
  nn::Var query_w = nn::col_block(w, e, e);

  // Each glimpse attends over the nodes and reads out their weighted mean.
  nn::Var query = tape.constant(nn::Matrix::Zero(1, e));
  for (int g = 0; g < config_.glimpses; ++g) {
    nn::Var pre = nn::add_bias_rows(node_proj, nn::matmul_nt(query, query_w));
    nn::Var weights = nn::softmax(nn::matmul_nt(nn::tanh(pre), v));
    query = nn::matmul_tn(weights, nodes);
  }
  nn::Var hidden = nn::relu(nn::add_bias_rows(nn::matmul_nt(query, tape.param(params_, "critic.head.W1")),
                                              tape.param(params_, "critic.head.b1")));
  return nn::add_bias_rows(nn::matmul_nt(hidden, tape.param(params_, "critic.head.W2")),
                           tape.param(params_, "critic.head.b2"));
}

double CriticNet::value(const Eigen::MatrixXd& static_features) {
  nn::Tape tape;
  return value(tape, static_features).scalar();
}

double value(CriticNet& critic, const Eigen::MatrixXd& static_features) { return critic.value(static_features); }

int sample_index(const Eigen::VectorXd& probs, std::mt19937_64& rng) {
  const double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double cum = 0.0;
  int last = -1;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs(i) <= 0.0) continue;
    cum += probs(i);
    last = static_cast<int>(i);
    if (r < cum) return last;
  }
  if (last < 0) throw ContractViolation("sample_index: no positive probability");
  return last;  // rounding left r above the final cumulative sum
}

int argmax_legal(const Eigen::VectorXd& logits, const std::vector<int>& legal) {
  if (legal.empty()) throw ContractViolation("argmax_legal: empty legal set");
  int best = -1;
  for (int n : legal)
    if (best < 0 || logits(n) > logits(best) || (logits(n) == logits(best) && n < best)) best = n;
  return best;
}

ActorSession::ActorSession(ActorNet& actor, nn::Tape& tape) : actor_(actor), tape_(tape) {}

void ActorSession::prepare(const Observation& obs) {
  nn::ParamStore& p = actor_.params();
  const Eigen::Index e = actor_.config().embed_dim, h = actor_.config().hidden_dim;
  static_embed_ = nn::embed(tape_.constant(obs.static_features), tape_.param(p, "static.W"),
                            tape_.param(p, "static.b"));
  nn::Var w = tape_.param(p, "attn.W");
  static_proj_ = nn::matmul_nt(static_embed_, nn::col_block(w, 0, e));
  attn_dynamic_ = nn::col_block(w, e, e);
  attn_hidden_ = nn::col_block(w, 2 * e, h);
  state_ = {tape_.constant(nn::Matrix::Zero(1, h)), tape_.constant(nn::Matrix::Zero(1, h))};
  last_node_ = 0;  // the fleet starts at the depot
  prepared_ = true;
}

ActorSession::Choice ActorSession::decide(const Observation& obs, const std::vector<int>& legal, int forced,
                                          DecodeMode mode, std::mt19937_64* rng) {
  if (legal.empty()) throw ContractViolation("act: empty legal set");
  if (obs.static_features.cols() != Observation::kStaticDim ||
      obs.dynamic_features.cols() != actor_.dynamic_dim() ||
      obs.dynamic_features.rows() != obs.static_features.rows())
    throw ContractViolation("act: observation shape does not match the actor");
  if (!prepared_) prepare(obs);
  nn::ParamStore& p = actor_.params();

  state_ = nn::lstm_step(nn::row(static_embed_, last_node_), state_, tape_.param(p, "lstm.W_ih"),
                         tape_.param(p, "lstm.W_hh"), tape_.param(p, "lstm.b"));

  Choice choice;
  if (legal.size() == 1) {
    if (forced >= 0 && forced != legal.front())
      throw FeasibilityError("node " + std::to_string(forced) + " is not legal");
    choice.node = legal.front();
    last_node_ = choice.node;
    return choice;
  }

  nn::Var dynamic =
      nn::embed(tape_.constant(obs.dynamic_features), tape_.param(p, "dynamic.W"), tape_.param(p, "dynamic.b"));
  nn::Var pre = nn::add_bias_rows(nn::add(static_proj_, nn::matmul_nt(dynamic, attn_dynamic_)),
                                  nn::matmul_nt(state_.h, attn_hidden_));
  nn::Var logits = nn::matmul_nt(nn::tanh(pre), tape_.param(p, "attn.v"));

  std::vector<bool> mask(static_cast<std::size_t>(logits.rows()), false);
  for (int n : legal) mask.at(static_cast<std::size_t>(n)) = true;
  nn::Var log_probs = nn::masked_log_softmax(logits, mask);
  choice.probabilities = log_probs.value().col(0).array().exp().matrix();

  if (forced >= 0) {
    if (!mask.at(static_cast<std::size_t>(forced))) throw FeasibilityError("node " + std::to_string(forced) + " is not legal");
    choice.node = forced;
  } else if (mode == DecodeMode::Greedy) {
    choice.node = argmax_legal(logits.value().col(0), legal);
  } else {
    choice.node = sample_index(choice.probabilities, *rng);
  }
  choice.log_prob_var = nn::pick(log_probs, choice.node);
  choice.log_prob = choice.log_prob_var.scalar();
  log_prob_sum_ = log_prob_sum_.valid() ? nn::add(log_prob_sum_, choice.log_prob_var) : choice.log_prob_var;
  last_node_ = choice.node;
  return choice;
}

ActorSession::Choice ActorSession::act(const Observation& obs, const std::vector<int>& legal, DecodeMode mode,
                                       std::mt19937_64& rng) {
  return decide(obs, legal, -1, mode, &rng);
}

ActorSession::Choice ActorSession::score(const Observation& obs, const std::vector<int>& legal, int node) {
  if (node < 0) throw ContractViolation("score: negative node");
  return decide(obs, legal, node, DecodeMode::Greedy, nullptr);
}

namespace {

PolicyRollout run_actor(ActorNet& actor, Environment& env,
                        const std::function<ActorSession::Choice(ActorSession&, const Observation&,
                                                                 const std::vector<int>&, int shuttle)>& decide) {
  PolicyRollout out;
  out.tape = std::make_unique<nn::Tape>();
  ActorSession session(actor, *out.tape);
  const bool with_distance = actor.config().use_distance;
  out.trajectory =
      run_episode(env, [&](const Environment& e, int shuttle, const std::vector<int>& legal, TrajectoryRecord& rec) {
        rec.observation = e.observe(shuttle, with_distance);
        const ActorSession::Choice c = decide(session, *rec.observation, legal, shuttle);
        rec.log_prob = c.log_prob;
        return c.node;
      });
  out.log_prob_sum = session.log_prob_sum();
  return out;
}

}  // namespace

PolicyRollout rollout_fleet(ActorNet& actor, Environment& env, DecodeMode mode, std::mt19937_64& rng) {
  return run_actor(actor, env,
                   [&](ActorSession& s, const Observation& obs, const std::vector<int>& legal, int) {
                     return s.act(obs, legal, mode, rng);
                   });
}

PolicyRollout rollout_single(ActorNet& actor, Environment& env, DecodeMode mode, std::mt19937_64& rng) {
  if (env.instance().num_shuttles() != 1) throw ContractViolation("rollout_single needs exactly one shuttle");
  return rollout_fleet(actor, env, mode, rng);
}

PolicyRollout replay_policy(ActorNet& actor, Environment& env, const std::vector<std::pair<int, int>>& dispatches) {
  std::size_t next = 0;
  return run_actor(actor, env,
                   [&](ActorSession& s, const Observation& obs, const std::vector<int>& legal, int shuttle) {
                     if (next >= dispatches.size()) throw FeasibilityError("replay: action sequence exhausted");
                     const auto [who, node] = dispatches[next++];
                     if (who != shuttle) throw FeasibilityError("replay: dispatch order differs");
                     return s.score(obs, legal, node);
                   });
}

}  // namespace ffevss
