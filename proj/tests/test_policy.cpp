#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ffevss/environment.hpp"
#include "ffevss/errors.hpp"
#include "ffevss/nn/gradcheck.hpp"
#include "ffevss/policy.hpp"
#include "ffevss/trajectory.hpp"
#include "support.hpp"

using namespace ffevss;
using namespace ffevss::testing;

namespace {

const ActorConfig kSmall{16, 16, true};

}  // namespace

TEST(Act, SingleLegalNodeIsForced) {
  ActorNet actor(kSmall, 1);
  Environment env(generated(1, 23, Difficulty::Easy));
  nn::Tape tape;
  ActorSession session(actor, tape);
  std::mt19937_64 rng(1);
  const auto choice = session.act(env.observe(0), {5}, DecodeMode::Sample, rng);
  EXPECT_EQ(choice.node, 5);
  EXPECT_EQ(choice.log_prob, 0.0);
  EXPECT_FALSE(choice.log_prob_var.valid());
  EXPECT_EQ(session.last_node(), 5);
}

TEST(Act, GreedyTakesTheArgmax) {
  const Eigen::VectorXd logits = (Eigen::VectorXd(3) << 0.1, 9.0, 0.2).finished();
  EXPECT_EQ(argmax_legal(logits, {0, 1, 2}), 1);
  EXPECT_EQ(argmax_legal(logits, {0, 2}), 2);
  EXPECT_EQ(argmax_legal(Eigen::VectorXd::Zero(3), {2, 1}), 1);
  EXPECT_THROW(argmax_legal(logits, {}), ContractViolation);
}

TEST(Act, GreedyChoiceHasHighestProbability) {
  ActorNet actor(kSmall, 2);
  Environment env(generated(2, 23, Difficulty::Easy));
  const auto legal = env.legal_actions(0);
  ASSERT_GT(legal.size(), 1u);
  nn::Tape tape;
  ActorSession session(actor, tape);
  std::mt19937_64 rng(0);
  const auto choice = session.act(env.observe(0), legal, DecodeMode::Greedy, rng);
  for (int n : legal) EXPECT_LE(choice.probabilities(n), choice.probabilities(choice.node));
  EXPECT_NEAR(choice.log_prob, std::log(choice.probabilities(choice.node)), 1e-12);
  double total = 0.0;
  for (int n : legal) total += choice.probabilities(n);
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Act, SamplingMatchesProbabilities) {
  ActorNet actor(kSmall, 3);
  Environment env(generated(3, 23, Difficulty::Easy));
  const auto legal = env.legal_actions(0);
  nn::Tape tape;
  ActorSession session(actor, tape);
  std::mt19937_64 rng(3);
  const Eigen::VectorXd p = session.act(env.observe(0), legal, DecodeMode::Greedy, rng).probabilities;

  const int draws = 100000;
  std::vector<int> counts(static_cast<std::size_t>(p.size()), 0);
  for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(sample_index(p, rng))];
  for (Eigen::Index n = 0; n < p.size(); ++n) {
    const double sigma = std::sqrt(draws * p(n) * (1.0 - p(n)));
    EXPECT_LE(std::abs(counts[static_cast<std::size_t>(n)] - draws * p(n)), 3.0 * sigma + 1e-9) << n;
    if (p(n) == 0.0) EXPECT_EQ(counts[static_cast<std::size_t>(n)], 0);
  }
}

TEST(Act, RejectsBadInputs) {
  ActorNet actor(kSmall, 4);
  Environment env(generated(4, 23, Difficulty::Easy));
  nn::Tape tape;
  ActorSession session(actor, tape);
  std::mt19937_64 rng(4);
  EXPECT_THROW(session.act(env.observe(0), {}, DecodeMode::Greedy, rng), ContractViolation);
  EXPECT_THROW(session.act(env.observe(0, false), {1, 2}, DecodeMode::Greedy, rng), ContractViolation);
  EXPECT_THROW(session.score(env.observe(0), {1, 2}, 3), FeasibilityError);
}

TEST(Act, ActorRejectsMisshapedParameters) {
  ActorNet small(kSmall, 5);
  EXPECT_THROW(ActorNet(ActorConfig{16, 8, true}, small.params()), ConfigError);
  EXPECT_THROW(ActorNet(ActorConfig{16, 16, false}, small.params()), ConfigError);
  EXPECT_NO_THROW(ActorNet(kSmall, small.params()));
}

TEST(Rollout, ScriptedInstanceFollowsTheOnlyRoute) {
  auto inst = scripted({depot(0, 0), supplier(1, 0.6, 0.1, 5), demander(2, 0.9, 0.8), charger(3, 0.2, 0.9)}, 1, 3);
  Environment env(inst);
  ActorNet actor(kSmall, 6);
  std::mt19937_64 rng(6);
  const PolicyRollout out = rollout_single(actor, env, DecodeMode::Sample, rng);
  const auto route = dispatches(out.trajectory);
  EXPECT_EQ(route, (std::vector<std::pair<int, int>>{{0, 1}, {0, 2}, {0, 0}}));
  const double legs = quantize_minutes(inst->travel_minutes(0, 1)) + quantize_minutes(inst->travel_minutes(1, 2)) +
                      quantize_minutes(inst->travel_minutes(2, 0));
  EXPECT_EQ(out.trajectory.makespan(), legs);
  EXPECT_TRUE(out.trajectory.terminal);
  EXPECT_FALSE(out.log_prob_sum.valid());
}

TEST(Rollout, NoDemandersGivesEmptyTrajectory) {
  Environment env(scripted({depot(0, 0), supplier(1, 0.5, 0.5, 5), charger(2, 1, 1)}));
  ActorNet actor(kSmall, 7);
  std::mt19937_64 rng(7);
  const PolicyRollout out = rollout_single(actor, env, DecodeMode::Sample, rng);
  EXPECT_TRUE(out.trajectory.records.empty());
  EXPECT_EQ(out.trajectory.total_reward, 0.0);
  EXPECT_TRUE(out.trajectory.terminal);
}

TEST(Rollout, SampledEpisodesTerminate) {
  ActorNet actor(kSmall, 8);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Environment env(generated(seed, 23, Difficulty::Easy));
    std::mt19937_64 rng(seed);
    const PolicyRollout out = rollout_single(actor, env, DecodeMode::Sample, rng);
    ASSERT_TRUE(out.trajectory.terminal) << seed;
    EXPECT_TRUE(env.all_demand_fulfilled());
    EXPECT_EQ(out.trajectory.makespan(), env.clock());
  }
}

TEST(Rollout, SingleRejectsFleets) {
  ActorNet actor(kSmall, 9);
  Environment env(generated(9, 23, Difficulty::Easy, 2));
  std::mt19937_64 rng(9);
  EXPECT_THROW(rollout_single(actor, env, DecodeMode::Sample, rng), ContractViolation);
}

TEST(Fleet, OneShuttleMatchesSingleRollout) {
  ActorNet actor(kSmall, 10);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Environment a(generated(seed, 23, Difficulty::Medium)), b(generated(seed, 23, Difficulty::Medium));
    std::mt19937_64 ra(seed), rb(seed);
    const PolicyRollout x = rollout_fleet(actor, a, DecodeMode::Sample, ra);
    const PolicyRollout y = rollout_single(actor, b, DecodeMode::Sample, rb);
    ASSERT_EQ(dispatches(x.trajectory), dispatches(y.trajectory));
    for (std::size_t i = 0; i < x.trajectory.records.size(); ++i) {
      EXPECT_EQ(x.trajectory.records[i].log_prob, y.trajectory.records[i].log_prob);
      EXPECT_EQ(x.trajectory.records[i].reward, y.trajectory.records[i].reward);
    }
    EXPECT_EQ(a.state(), b.state());
  }
}

TEST(Fleet, LaterShuttlesNeverSeeClaimedNodes) {
  ActorNet actor(kSmall, 11);
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Environment env(generated(seed, 23, Difficulty::Easy, 2));
    std::mt19937_64 rng(seed);
    const PolicyRollout out = rollout_fleet(actor, env, DecodeMode::Sample, rng);
    ASSERT_TRUE(out.trajectory.terminal);
    const auto& recs = out.trajectory.records;
    for (std::size_t i = 1; i < recs.size(); ++i) {
      // Records of one decision event share the clock; only the last one carries the reward.
      if (recs[i].clock != recs[i - 1].clock || recs[i - 1].reward != 0.0 || recs[i - 1].action == 0) continue;
      const auto& legal = recs[i].legal;
      EXPECT_EQ(std::find(legal.begin(), legal.end(), recs[i - 1].action), legal.end());
      ++checked;
    }
    EXPECT_EQ(-out.trajectory.total_reward, env.clock());
  }
  EXPECT_GT(checked, 0);
}

TEST(Fleet, ScriptedTwoShuttleRewardsSumToClock) {
  Environment env(scripted({depot(0.5, 0.5), supplier(1, 0.1, 0.1, 5), supplier(2, 0.9, 0.9, 2),
                            demander(3, 0.1, 0.9), demander(4, 0.9, 0.1), charger(5, 0.5, 0.9)},
                           2, 1));
  ActorNet actor(kSmall, 12);
  std::mt19937_64 rng(12);
  const PolicyRollout out = rollout_fleet(actor, env, DecodeMode::Sample, rng);
  ASSERT_TRUE(out.trajectory.terminal);
  double sum = 0.0;
  for (const auto& r : out.trajectory.records) sum += r.reward;
  EXPECT_EQ(-sum, env.clock());
}

TEST(Properties, ActionsAreLegalAndReplayable) {
  ActorNet actor(kSmall, 13);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = generated(seed, 23, static_cast<Difficulty>(seed % 3), 1 + seed % 2);
    Environment env(inst);
    std::mt19937_64 rng(seed);
    const PolicyRollout out = rollout_fleet(actor, env, DecodeMode::Sample, rng);
    for (const auto& r : out.trajectory.records)
      EXPECT_NE(std::find(r.legal.begin(), r.legal.end(), r.action), r.legal.end());
    Environment again(inst);
    const Trajectory replayed = replay_actions(again, dispatches(out.trajectory));
    EXPECT_EQ(replayed.makespan(), out.trajectory.makespan());
    EXPECT_EQ(again.state(), env.state());

    Environment scored(inst);
    const PolicyRollout rescored = replay_policy(actor, scored, dispatches(out.trajectory));
    for (std::size_t i = 0; i < out.trajectory.records.size(); ++i)
      EXPECT_NEAR(rescored.trajectory.records[i].log_prob, out.trajectory.records[i].log_prob, 1e-12);
  }
}

TEST(Properties, LogProbabilitiesFactorize) {
  ActorNet actor(kSmall, 14);
  Environment env(generated(14, 10, Difficulty::Easy));
  nn::Tape tape;
  ActorSession session(actor, tape);
  std::mt19937_64 rng(14);
  double product = 1.0;
  while (!env.done()) {
    for (int s : env.ready_shuttles()) {
      const auto legal = env.legal_actions(s);
      const auto c = session.act(env.observe(s), legal, DecodeMode::Sample, rng);
      if (c.probabilities.size() > 0) product *= c.probabilities(c.node);
      env.assign(s, c.node);
    }
    env.advance();
  }
  ASSERT_TRUE(session.log_prob_sum().valid());
  EXPECT_NEAR(std::exp(session.log_prob_sum().scalar()), product, 1e-12 * std::max(1.0, product));
}

TEST(Properties, GreedyDecodingIsDeterministic) {
  ActorNet a(kSmall, 15), b(kSmall, 15);
  const auto inst = generated(15, 23, Difficulty::Hard);
  Environment ea(inst), eb(inst);
  std::mt19937_64 ra(1), rb(2);
  const PolicyRollout x = rollout_fleet(a, ea, DecodeMode::Greedy, ra);
  const PolicyRollout y = rollout_fleet(b, eb, DecodeMode::Greedy, rb);
  EXPECT_EQ(dispatches(x.trajectory), dispatches(y.trajectory));
  EXPECT_EQ(x.trajectory.makespan(), y.trajectory.makespan());
}

TEST(Critic, ZeroWeightsGiveZeroValue) {
  CriticNet critic(CriticConfig{8, 8, 3}, 1);
  for (auto& p : critic.params()) p.value.setZero();
  EXPECT_EQ(value(critic, Environment(generated(1, 23, Difficulty::Easy)).observe(0).static_features), 0.0);
}

TEST(Critic, ValueIgnoresNodeOrder) {
  CriticNet critic(CriticConfig{16, 16, 3}, 2);
  const Eigen::MatrixXd x = Environment(generated(2, 23, Difficulty::Medium)).observe(0).static_features;
  Eigen::VectorXi order = Eigen::VectorXi::LinSpaced(x.rows(), 0, static_cast<int>(x.rows()) - 1);
  std::mt19937_64 rng(2);
  std::shuffle(order.data(), order.data() + order.size(), rng);
  const Eigen::PermutationMatrix<Eigen::Dynamic> perm(order);
  EXPECT_NEAR(critic.value(perm * x), critic.value(x), 1e-12);
}

TEST(Critic, LossGradientMatchesFiniteDifferences) {
  CriticNet critic(CriticConfig{}, 3);
  const Eigen::MatrixXd x = Environment(generated(3, 10, Difficulty::Easy)).observe(0).static_features;
  const double target = -7.5;
  auto loss = [&](nn::Tape& tape) {
    nn::Var v = critic.value(tape, x);
    nn::Var diff = nn::add(v, tape.constant(nn::Matrix::Constant(1, 1, -target)));
    return nn::hadamard(diff, diff);
  };
  critic.params().zero_grad();
  {
    nn::Tape tape;
    nn::Var l = loss(tape);
    tape.backward(l);
    tape.accumulate_into(critic.params());
  }
  std::mt19937_64 rng(3);
  const auto check = nn::gradient_check(
      critic.params(),
      [&] {
        nn::Tape tape;
        return loss(tape).scalar();
      },
      50, rng);
  EXPECT_LT(check.max_relative_error, 1e-3) << check.worst;
}

TEST(Actor, EpisodeLossGradientMatchesFiniteDifferences) {
  ActorNet actor(ActorConfig{}, 4);
  const auto inst = generated(4, 10, Difficulty::Easy);
  Environment env(inst);
  std::mt19937_64 rng(4);
  const auto route = dispatches(rollout_single(actor, env, DecodeMode::Sample, rng).trajectory);
  const double advantage = -2.3;

  actor.params().zero_grad();
  {
    Environment e(inst);
    PolicyRollout r = replay_policy(actor, e, route);
    ASSERT_TRUE(r.log_prob_sum.valid());
    r.tape->backward(r.log_prob_sum, advantage);
    r.tape->accumulate_into(actor.params());
  }
  std::mt19937_64 pick(40);
  const auto check = nn::gradient_check(
      actor.params(),
      [&] {
        Environment e(inst);
        return advantage * replay_policy(actor, e, route).log_prob_sum.scalar();
      },
      50, pick);
  EXPECT_LT(check.max_relative_error, 1e-3) << check.worst;
}
