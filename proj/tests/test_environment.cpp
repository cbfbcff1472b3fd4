#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "ffevss/environment.hpp"
#include "ffevss/errors.hpp"
#include "ffevss/trajectory.hpp"
#include "support.hpp"

using namespace ffevss;
using namespace ffevss::testing;

namespace {

int count_if_true(const std::vector<bool>& v) { return static_cast<int>(std::count(v.begin(), v.end(), true)); }

int supplier_count(const NetworkInstance& inst) {
  int n = 0;
  for (const Node& node : inst.nodes()) n += node.role == NodeRole::Supplier;
  return n;
}

// Checks every simulator invariant that must hold between decision events.
void expect_invariants(const Environment& env, int suppliers) {
  const NetworkInstance& inst = env.instance();
  const EnvState& st = env.state();
  ASSERT_EQ(env.total_drivers(), inst.num_shuttles() * inst.drivers_per_shuttle());
  ASSERT_EQ(env.total_evs(), suppliers);
  ASSERT_LE(env.max_ev_load(), 1);
  for (const ShuttleState& s : st.shuttles) {
    ASSERT_GE(s.onboard_drivers, 0);
    ASSERT_LE(s.onboard_drivers, inst.drivers_per_shuttle());
  }
  for (std::size_t i = 1; i < st.pending_events.size(); ++i)
    ASSERT_FALSE(fires_before(st.pending_events[i], st.pending_events[i - 1]));
  for (const DelayedEvent& e : st.pending_events) ASSERT_GE(e.fire_at, st.clock);
}

// Plays uniformly random legal actions, checking invariants after each advance.
Trajectory random_episode(Environment& env, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int suppliers = supplier_count(env.instance());
  double last_clock = env.clock();
  int open = count_if_true(env.state().demand_open);
  Trajectory traj;
  while (!env.done()) {
    for (int s : env.ready_shuttles()) {
      const auto legal = env.legal_actions(s);
      const int node = legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(rng)];
      // Suppliers are only ever visited to drop a driver.
      if (env.instance().node(node).role == NodeRole::Supplier && node != env.state().shuttles[s].location)
        EXPECT_GT(env.state().shuttles[s].onboard_drivers, 0);
      env.assign(s, node);
    }
    const StepOutcome out = env.advance();
    EXPECT_LE(out.reward, 0.0);
    EXPECT_EQ(out.reward, last_clock - out.clock);
    EXPECT_GE(out.clock, last_clock);
    traj.total_reward += out.reward;
    last_clock = out.clock;
    const int now_open = count_if_true(env.state().demand_open);
    EXPECT_LE(now_open, open);
    open = now_open;
    expect_invariants(env, suppliers);
  }
  traj.terminal = !env.truncated();
  traj.truncated = env.truncated();
  traj.final_clock = env.clock();
  return traj;
}

}  // namespace

TEST(Reset, EasyInstanceHoldsTableCounts) {
  Environment env(generated(7, 23, Difficulty::Easy, 2));
  const StepOutcome out = env.reset();
  const EnvState& st = env.state();
  EXPECT_EQ(std::accumulate(st.ev_count.begin(), st.ev_count.end(), 0), 8);
  EXPECT_EQ(count_if_true(st.demand_open), 7);
  EXPECT_TRUE(std::all_of(st.charger_available.begin(), st.charger_available.end(), [](bool b) { return b; }));
  EXPECT_TRUE(st.pending_events.empty());
  EXPECT_EQ(st.clock, 0.0);
  for (const ShuttleState& s : st.shuttles) {
    EXPECT_EQ(s.location, 0);
    EXPECT_EQ(s.onboard_drivers, 3);
  }
  EXPECT_EQ(out.reward, 0.0);
  EXPECT_EQ(out.ready_shuttles, (std::vector<int>{0, 1}));
  EXPECT_EQ(out.masks.size(), 2u);
}

TEST(Reset, NoDemandersIsDoneImmediately) {
  Environment env(scripted({depot(0, 0), supplier(1, 0.5, 0.5, 5), charger(2, 1, 1)}));
  const StepOutcome out = env.reset();
  EXPECT_TRUE(out.done);
  EXPECT_FALSE(out.truncated);
  EXPECT_EQ(out.reward, 0.0);
  EXPECT_TRUE(out.ready_shuttles.empty());
}

TEST(Reset, RestoresAfterPlay) {
  Environment env(generated(3, 23, Difficulty::Medium));
  const EnvState initial = env.state();
  random_episode(env, 3);
  env.reset();
  EXPECT_EQ(env.state(), initial);
  EXPECT_FALSE(env.done());
}

TEST(Masking, LoadedShuttleSeesOnlyTheSupplier) {
  Environment env(scripted({depot(0, 0), supplier(1, 0.5, 0.5, 5), demander(2, 1, 1)}));
  EXPECT_EQ(env.legal_actions(0), (std::vector<int>{1}));
}

TEST(Masking, EmptyShuttleSeesOnlyDriverNodes) {
  // Supplier 1 sends its EV to demander 4 and supplier 3 to demander 9;
  // the EV at supplier 2 stays behind while the shuttle has no drivers.
  Environment env(scripted({depot(0.5, 0.5), supplier(1, 0.1, 0.1, 5), supplier(2, 0.5, 0.9, 5),
                            supplier(3, 0.9, 0.1, 5), demander(4, 0.1, 0.2), charger(5, 0.3, 0.5),
                            charger(6, 0.4, 0.5), charger(7, 0.6, 0.5), charger(8, 0.7, 0.5), demander(9, 0.9, 0.2),
                            demander(10, 0.5, 1.0)},
                           1, 2));
  env.step({{0, 1}});
  env.step({{0, 3}});
  ASSERT_EQ(env.state().shuttles[0].onboard_drivers, 0);
  EXPECT_EQ(env.state().ev_count[2], 1);
  EXPECT_EQ(env.legal_actions(0), (std::vector<int>{4, 9}));
}

TEST(Masking, AssignedNodeIsHiddenFromOtherShuttles) {
  Environment env(scripted({depot(0.5, 0.5), supplier(1, 0.1, 0.1, 5), supplier(2, 0.2, 0.9, 5),
                            demander(3, 0.9, 0.9), demander(4, 0.9, 0.1), supplier(5, 0.4, 0.4, 5)},
                           2, 3));
  auto before = env.legal_actions(1);
  ASSERT_NE(std::find(before.begin(), before.end(), 5), before.end());
  env.assign(0, 5);
  auto after = env.legal_actions(1);
  EXPECT_EQ(std::find(after.begin(), after.end(), 5), after.end());
}

TEST(Masking, DropNeedsFreeDemandBeyondReservations) {
  // Two suppliers but one demander: once shuttle 0 heads for a drop the
  // other supplier has nowhere to send its EV.
  Environment env(scripted({depot(0.5, 0.5), supplier(1, 0.1, 0.1, 5), supplier(2, 0.9, 0.9, 5),
                            demander(3, 0.5, 0.1)},
                           2, 1));
  env.assign(0, 1);
  EXPECT_EQ(env.legal_actions(1), (std::vector<int>{0}));
}

TEST(Masking, FullShuttleSkipsPickupOnlyNodes) {
  // Shuttle 1 drops at 3 (EV to 4) and heads for the far supplier 5.
  // Shuttle 0 drops at 1 (EV to 2) and boards that driver, which fills it
  // while shuttle 1's driver waits at 4.
  Environment env(scripted({depot(0.5, 0.5), supplier(1, 0.1, 0.5, 5), demander(2, 0.1, 0.4),
                            supplier(3, 0.5, 0.6, 5), demander(4, 0.5, 0.7), supplier(5, 1, 1, 5),
                            demander(6, 1, 0)},
                           2, 2));
  env.step({{0, 1}, {1, 3}});
  ASSERT_EQ(env.ready_shuttles(), (std::vector<int>{1}));
  env.step({{1, 5}});
  ASSERT_EQ(env.ready_shuttles(), (std::vector<int>{0}));
  env.step({{0, 2}});
  ASSERT_EQ(env.ready_shuttles(), (std::vector<int>{0}));
  ASSERT_EQ(env.state().shuttles[0].onboard_drivers, 2);
  ASSERT_EQ(env.state().driver_count[4], 1);
  EXPECT_EQ(env.legal_actions(0), (std::vector<int>{2}));
}

TEST(Masking, ErrorsForBusyAndIllegal) {
  Environment env(scripted({depot(0, 0), supplier(1, 0.5, 0.5, 5), demander(2, 1, 1)}));
  EXPECT_THROW(env.assign(0, 2), FeasibilityError);
  env.assign(0, 1);
  EXPECT_THROW(env.legal_actions(0), ContractViolation);
  EXPECT_THROW(env.assign(0, 1), ContractViolation);
}

TEST(Masking, AdvanceNeedsEveryReadyShuttle) {
  Environment env(generated(1, 23, Difficulty::Easy, 2));
  env.assign(0, env.legal_actions(0).front());
  EXPECT_THROW(env.advance(), ContractViolation);
}

TEST(Masking, DepotOnlyWhenAllDemandIsServed) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Environment env(generated(seed, 23, Difficulty::Medium));
    std::mt19937_64 rng(seed);
    while (!env.done()) {
      for (int s : env.ready_shuttles()) {
        const auto legal = env.legal_actions(s);
        const bool has_depot = std::find(legal.begin(), legal.end(), 0) != legal.end();
        if (env.state().shuttles[s].location != 0) EXPECT_EQ(has_depot, env.all_demand_fulfilled());
        if (env.all_demand_fulfilled() && env.drivers_outside() == 0 && env.state().shuttles[s].location != 0)
          EXPECT_EQ(legal, (std::vector<int>{0}));
        env.assign(s, legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(rng)]);
      }
      env.advance();
    }
  }
}

TEST(Step, MoveAdvancesByTravelTime) {
  // 0.75 mi at 45 mph is one minute.
  Environment env(scripted({depot(0, 0), supplier(1, 0.75, 0, 5), demander(2, 0.75, 0.75)}));
  const StepOutcome out = env.step({{0, 1}});
  EXPECT_EQ(out.reward, -1.0);
  EXPECT_EQ(out.clock, 1.0);
  EXPECT_EQ(env.state().shuttles[0].onboard_drivers, 2);
  EXPECT_TRUE(env.state().expected_ev[2]);
  EXPECT_TRUE(env.state().expected_driver[2]);
}

TEST(Step, PickupWaitsForTheExpectedDriver) {
  // The EV needs charging: 0.75 mi to the charger, three levels of charge,
  // then 0.75 mi on to the demander.
  auto inst = scripted({depot(0, 0), supplier(1, 0.75, 0, 2), charger(2, 0.75, 0.75), demander(3, 0, 0.75)}, 1, 1);
  Environment env(inst);
  env.step({{0, 1}});
  ASSERT_EQ(env.state().shuttles[0].onboard_drivers, 0);
  const double eta = env.state().driver_eta[3];
  EXPECT_DOUBLE_EQ(eta, 1.0 + 1.0 + quantize_minutes(inst->charging_minutes(2)) + 1.0);
  EXPECT_EQ(env.legal_actions(0), (std::vector<int>{3}));
  EXPECT_DOUBLE_EQ(env.immediate_cost(0, 3), eta - env.clock());

  const StepOutcome out = env.step({{0, 3}});
  EXPECT_EQ(out.clock, eta);
  EXPECT_EQ(out.reward, 1.0 - eta);
  EXPECT_EQ(env.state().shuttles[0].onboard_drivers, 1);
  EXPECT_FALSE(env.state().demand_open[0]);
  EXPECT_TRUE(env.state().charger_available[0]);
  EXPECT_EQ(env.state().charger_uses[0], 1);
}

TEST(Step, TwoShuttlesFinishInOrder) {
  // At 15 mph, 0.25 mi is 1.0 min and 0.75 mi is 3.0 min.
  auto inst = std::make_shared<const NetworkInstance>(
      std::vector<Node>{depot(0, 0), supplier(1, 0.25, 0, 5), supplier(2, 0, 0.75, 5), demander(3, 1, 1),
                        demander(4, 1, 0.5)},
      FleetSpec{2, 3}, 0, 15.0);
  Environment env(inst);
  const StepOutcome out = env.step({{0, 1}, {1, 2}});
  EXPECT_EQ(out.clock, 1.0);
  EXPECT_EQ(out.reward, -1.0);
  EXPECT_EQ(out.ready_shuttles, (std::vector<int>{0}));
  EXPECT_EQ(env.state().shuttles[1].current_action, 2);
  EXPECT_EQ(env.state().shuttles[1].action_complete_at, 3.0);
}

TEST(Step, EpisodeEndsWithFleetParked) {
  Environment env(scripted({depot(0, 0), supplier(1, 0.75, 0, 5), demander(2, 0.75, 0.75)}, 1, 1));
  env.step({{0, 1}});
  EXPECT_EQ(env.legal_actions(0), (std::vector<int>{2}));
  env.step({{0, 2}});
  EXPECT_EQ(env.legal_actions(0), (std::vector<int>{0}));
  const StepOutcome out = env.step({{0, 0}});
  EXPECT_TRUE(out.done);
  EXPECT_FALSE(out.truncated);
  EXPECT_TRUE(env.state().shuttles[0].parked);
  EXPECT_DOUBLE_EQ(out.clock, 1.0 + 1.0 + quantize_minutes(minutes(std::hypot(0.75, 0.75))));
}

TEST(Step, StepLimitTruncates) {
  Environment env(generated(5, 23, Difficulty::Easy), EnvOptions{3});
  EXPECT_EQ(env.max_steps(), 3);
  StepOutcome out;
  while (!env.done()) {
    std::map<int, int> actions;
    for (int s : env.ready_shuttles()) actions[s] = env.legal_actions(s).front();
    out = env.step(actions);
  }
  EXPECT_TRUE(out.truncated);
  EXPECT_EQ(env.state().steps, 3);
  EXPECT_EQ(Environment(generated(5, 23, Difficulty::Easy)).max_steps(), 230);
}

TEST(Observe, DistanceToOwnNodeIsZeroAtReset) {
  Environment env(generated(2, 23, Difficulty::Easy));
  const Observation obs = env.observe(0);
  ASSERT_EQ(obs.dynamic_features.cols(), 4);
  EXPECT_EQ(obs.dynamic_features(0, 2), 0.0);
  EXPECT_EQ(obs.dynamic_features(5, 2), env.instance().travel_minutes(0, 5));
  for (int i = 0; i < env.instance().size(); ++i) {
    const Node& n = env.instance().node(i);
    EXPECT_EQ(obs.static_features(i, 0), n.x);
    EXPECT_EQ(obs.static_features(i, 1), n.y);
    EXPECT_EQ(obs.static_features(i, 2), n.initial_charge);
  }
  EXPECT_EQ(env.observe(0, false).dynamic_features.cols(), 3);
}

TEST(Observe, TransitAndOnboardFeatures) {
  Environment env(scripted({depot(0, 0), supplier(1, 0.75, 0, 5), demander(2, 0.75, 0.75)}));
  env.step({{0, 1}});
  const Observation obs = env.observe(0);
  EXPECT_EQ(obs.location, 1);
  EXPECT_EQ(obs.dynamic_features(2, 0), 1.0);  // EV heading to the demander
  EXPECT_EQ(obs.dynamic_features(2, 1), 1.0);  // and its driver
  EXPECT_EQ(obs.dynamic_features(1, 0), 0.0);
  EXPECT_TRUE((obs.dynamic_features.col(3).array() == 2.0).all());
  const Observation slim = env.observe(0, false);
  EXPECT_TRUE((slim.dynamic_features.col(2).array() == 2.0).all());
}

TEST(Makespan, NegatesRewardSum) {
  Trajectory t;
  for (double r : {-1.0, -2.5, -0.7}) {
    t.records.push_back({});
    t.records.back().reward = r;
    t.total_reward += r;
  }
  EXPECT_NEAR(t.makespan(), 4.2, 1e-12);
  EXPECT_EQ(Trajectory{}.makespan(), 0.0);
}

TEST(Makespan, EqualsFinalClockExactly) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Environment env(generated(seed, 23, static_cast<Difficulty>(seed % 3), 1 + seed % 3));
    std::mt19937_64 rng(seed);
    const Trajectory t = run_episode(env, [&](const Environment&, int, const std::vector<int>& legal,
                                              TrajectoryRecord&) {
      return legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(rng)];
    });
    ASSERT_TRUE(t.terminal);
    EXPECT_EQ(t.makespan(), env.clock());
    double sum = 0.0;
    for (const TrajectoryRecord& r : t.records) sum += r.reward;
    EXPECT_EQ(-sum, env.clock());
  }
}

TEST(Properties, RandomPlayTerminatesAndConserves) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Environment env(generated(seed, 23, static_cast<Difficulty>(seed % 3), 1 + seed % 2));
    const Trajectory t = random_episode(env, seed ^ 0x5bd1e995);
    ASSERT_TRUE(t.terminal) << "seed " << seed;
    ASSERT_TRUE(env.all_demand_fulfilled());
    ASSERT_EQ(env.drivers_outside(), 0);
    ASSERT_EQ(-t.total_reward, env.clock());
  }
}

TEST(Properties, ChargersAreReleasedAfterCharging) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Environment env(generated(seed, 23, Difficulty::Hard));
    random_episode(env, seed);
    const EnvState& st = env.state();
    EXPECT_EQ(count_if_true(st.charger_available), static_cast<int>(st.charger_available.size()));
    int low = 0;
    for (const Node& n : env.instance().nodes())
      low += n.role == NodeRole::Supplier && env.instance().needs_charging(n.initial_charge);
    EXPECT_EQ(std::accumulate(st.charger_uses.begin(), st.charger_uses.end(), 0), low);
  }
}

TEST(Properties, CopiesAreIndependentClones) {
  Environment env(generated(11, 23, Difficulty::Easy));
  env.step({{0, env.legal_actions(0).front()}});
  Environment copy = env;
  random_episode(copy, 1);
  EXPECT_TRUE(copy.done());
  EXPECT_FALSE(env.done());
  Environment again = env;
  random_episode(again, 1);
  EXPECT_EQ(again.state(), copy.state());
}
