// Command-line front end: instance generation, training, evaluation,
// comparison, exact oracle runs and plot data export.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ffevss/baselines.hpp"
#include "ffevss/errors.hpp"
#include "ffevss/instance.hpp"
#include "ffevss/oracle.hpp"
#include "ffevss/policy.hpp"
#include "ffevss/results.hpp"
#include "ffevss/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace ffevss;
using nlohmann::json;

namespace {

constexpr int kUsageExit = 2;
constexpr int kFailureExit = 1;

std::vector<fs::path> instance_files(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const std::string& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(p))
        if (entry.is_regular_file() && entry.path().extension() == ".json") found.push_back(entry.path());
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(p)) {
      files.push_back(p);
    } else {
      throw ConfigError("no such instance file or directory: " + in);
    }
  }
  if (files.empty()) throw ConfigError("no instance files found");
  return files;
}

struct FleetOverride {
  int shuttles = 0;
  int drivers = 0;
};

std::vector<NetworkInstance> load_instances(const std::vector<std::string>& inputs, const FleetOverride& fleet) {
  std::vector<NetworkInstance> out;
  for (const fs::path& f : instance_files(inputs)) {
    NetworkInstance inst = load_instance(f);
    if (fleet.shuttles > 0 || fleet.drivers > 0) {
      FleetSpec spec = inst.fleet();
      if (fleet.shuttles > 0) spec.num_shuttles = fleet.shuttles;
      if (fleet.drivers > 0) spec.drivers_per_shuttle = fleet.drivers;
      inst = inst.with_fleet(spec);
    }
    out.push_back(std::move(inst));
  }
  return out;
}

/// A method is "greedy", "random", "oracle" or the path of a checkpoint.
struct Method {
  std::string name;
  std::shared_ptr<ActorNet> actor;
  std::uint64_t seed = 0;
};

Method resolve_method(const std::string& spec, const std::string& checkpoint, std::uint64_t seed) {
  Method m;
  m.seed = seed;
  if (spec == "greedy" || spec == "random" || spec == "oracle") {
    m.name = spec;
    return m;
  }
  const std::string path = spec == "rl" ? checkpoint : spec;
  if (path.empty()) throw ConfigError("method rl needs --checkpoint");
  m.name = "rl";
  m.actor = std::make_shared<ActorNet>(load_agent(path).actor);
  return m;
}

std::vector<ResultRow> run_method(const Method& m, const std::vector<NetworkInstance>& instances, int max_steps,
                                  const std::string& trace_dir) {
  std::uint64_t episode = 0;
  auto trace = [&](const NetworkInstance& inst, const Trajectory& t) {
    if (trace_dir.empty()) return;
    fs::create_directories(trace_dir);
    std::ofstream out(fs::path(trace_dir) / (m.name + "_" + std::to_string(inst.seed()) + ".jsonl"));
    write_trajectory_jsonl(out, t);
  };
  EpisodeRunner runner;
  if (m.name == "greedy") {
    runner = [&](Environment& env) {
      Trajectory t = greedy_baseline(env);
      trace(env.instance(), t);
      return t;
    };
  } else if (m.name == "random") {
    runner = [&](Environment& env) {
      std::mt19937_64 rng(m.seed + episode++);
      Trajectory t = random_policy(env, rng);
      trace(env.instance(), t);
      return t;
    };
  } else if (m.name == "oracle") {
    runner = [&](Environment& env) {
      const OracleResult best = oracle_optimal(env);
      Trajectory t = replay_actions(env, best.dispatches);
      trace(env.instance(), t);
      return t;
    };
  } else {
    runner = [&](Environment& env) {
      std::mt19937_64 unused(0);
      Trajectory t = rollout_fleet(*m.actor, env, DecodeMode::Greedy, unused).trajectory;
      trace(env.instance(), t);
      return t;
    };
  }
  return evaluate(m.name, instances, runner, max_steps);
}

void write_rows(const std::string& path, const std::vector<ResultRow>& rows) {
  if (path.empty() || path == "-") {
    write_results_csv(std::cout, rows);
    return;
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  write_results_csv(out, rows);
}

void print_summary(const std::vector<ResultRow>& rows) {
  const ResultSummary s = summarize(rows);
  std::cerr << "method=" << s.method << " instances=" << s.count << " mean_makespan=" << s.mean_makespan
            << " mean_seconds=" << s.mean_seconds << '\n';
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- route export --------------------------------------------------------

json route_json(const NetworkInstance& inst, const Trajectory& traj) {
  json nodes = json::array();
  for (const Node& n : inst.nodes())
    nodes.push_back({{"id", n.id}, {"x", n.x}, {"y", n.y}, {"role", std::string(to_string(n.role))},
                     {"charge", n.initial_charge}});
  std::map<int, json> routes;
  for (int s = 0; s < inst.num_shuttles(); ++s)
    routes[s] = json::array({{{"node", 0}, {"x", inst.node(0).x}, {"y", inst.node(0).y}, {"depart", 0.0}}});
  for (const TrajectoryRecord& r : traj.records) {
    const Node& n = inst.node(r.action);
    routes[r.shuttle].push_back({{"node", n.id}, {"x", n.x}, {"y", n.y}, {"depart", r.clock}});
  }
  json out;
  out["seed"] = inst.seed();
  out["makespan"] = traj.makespan();
  out["nodes"] = nodes;
  out["routes"] = json::array();
  for (auto& [s, pts] : routes) out["routes"].push_back({{"shuttle", s}, {"points", pts}});
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nightly rebalancing of free-floating EV sharing fleets"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Write seeded random instances as JSON files");
  int gen_n = 23, gen_count = 1, gen_shuttles = 1, gen_drivers = 3;
  std::string gen_level = "easy", gen_out = "instances";
  std::uint64_t gen_seed = 1;
  gen->add_option("--n", gen_n, "Nodes including the depot")->capture_default_str();
  gen->add_option("--difficulty", gen_level, "easy | medium | hard")->capture_default_str();
  gen->add_option("--count", gen_count, "Number of instances")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Seed of the first instance; later ones add 1")->capture_default_str();
  gen->add_option("--shuttles", gen_shuttles)->capture_default_str();
  gen->add_option("--drivers", gen_drivers, "Drivers per shuttle")->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory")->capture_default_str();

  // train
  auto* tr = app.add_subcommand("train", "Train an actor-critic agent");
  std::string tr_config, tr_checkpoint = "agent.ckpt", tr_stats = "train_stats.csv", tr_flavor;
  std::optional<int> tr_epochs, tr_batch, tr_n, tr_shuttles, tr_drivers, tr_every;
  std::optional<std::uint64_t> tr_seed;
  std::optional<double> tr_lr, tr_lr_critic, tr_clip, tr_lr_final;
  std::vector<std::string> tr_levels;
  std::vector<int> tr_sizes;
  bool tr_no_distance = false;
  tr->add_option("--config", tr_config, "TrainConfig JSON file");
  tr->add_option("--epochs", tr_epochs);
  tr->add_option("--batch", tr_batch, "Episodes per epoch");
  tr->add_option("--seed", tr_seed);
  tr->add_option("--n", tr_n, "Network size (shorthand for a single --sizes entry)");
  tr->add_option("--sizes", tr_sizes, "Network sizes for net-rl");
  tr->add_option("--difficulty", tr_levels, "One or more of easy, medium, hard");
  tr->add_option("--flavor", tr_flavor, "rl | gen-rl | net-rl");
  tr->add_option("--shuttles", tr_shuttles);
  tr->add_option("--drivers", tr_drivers, "Drivers per shuttle");
  tr->add_option("--lr", tr_lr, "Actor learning rate");
  tr->add_option("--lr-critic", tr_lr_critic, "Critic learning rate");
  tr->add_option("--clip", tr_clip, "Gradient norm clip");
  tr->add_option("--lr-final", tr_lr_final, "Fraction of the learning rates reached at the last epoch");
  tr->add_option("--checkpoint-every", tr_every);
  tr->add_flag("--no-distance", tr_no_distance, "Drop the distance feature");
  tr->add_option("--checkpoint", tr_checkpoint, "Checkpoint path")->capture_default_str();
  tr->add_option("--stats", tr_stats, "TrainStats CSV path")->capture_default_str();

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate one method on a set of instances");
  std::vector<std::string> ev_inputs;
  std::string ev_method = "greedy", ev_checkpoint, ev_out = "-", ev_trace;
  bool ev_greedy = false;
  std::uint64_t ev_seed = 1;
  int ev_shuttles = 0, ev_drivers = 0, ev_max_steps = 0;
  ev->add_option("--instances,--instance", ev_inputs, "Instance files or directories")->required();
  ev->add_option("--method", ev_method, "greedy | random | oracle | rl | <checkpoint path>")->capture_default_str();
  ev->add_flag("--greedy", ev_greedy, "Shorthand for --method greedy");
  ev->add_option("--checkpoint", ev_checkpoint, "Checkpoint for --method rl");
  ev->add_option("--seed", ev_seed, "Seed for the random policy")->capture_default_str();
  ev->add_option("--shuttles", ev_shuttles, "Override the fleet size");
  ev->add_option("--drivers", ev_drivers, "Override drivers per shuttle");
  ev->add_option("--max-steps", ev_max_steps);
  ev->add_option("--out", ev_out, "ResultRow CSV ('-' for stdout)")->capture_default_str();
  ev->add_option("--trace-dir", ev_trace, "Write one trajectory JSONL per instance");

  // compare
  auto* cmp = app.add_subcommand("compare", "Evaluate two methods and report the win percentage of --a");
  std::vector<std::string> cmp_inputs;
  std::string cmp_a, cmp_b, cmp_out = "-";
  std::uint64_t cmp_seed = 1;
  int cmp_shuttles = 0, cmp_drivers = 0;
  cmp->add_option("--a", cmp_a, "greedy | random | oracle | <checkpoint path>")->required();
  cmp->add_option("--b", cmp_b, "greedy | random | oracle | <checkpoint path>")->required();
  cmp->add_option("--instances", cmp_inputs)->required();
  cmp->add_option("--seed", cmp_seed)->capture_default_str();
  cmp->add_option("--shuttles", cmp_shuttles);
  cmp->add_option("--drivers", cmp_drivers);
  cmp->add_option("--out", cmp_out, "ResultRow CSV of both methods ('-' for stdout)")->capture_default_str();

  // oracle
  auto* orc = app.add_subcommand("oracle", "Exact minimum makespan on tiny instances");
  std::vector<std::string> orc_inputs;
  std::string orc_out = "-";
  OracleLimits limits;
  orc->add_option("--instance,--instances", orc_inputs)->required();
  orc->add_option("--max-nodes", limits.max_non_depot_nodes)->capture_default_str();
  orc->add_option("--max-shuttles", limits.max_shuttles)->capture_default_str();
  orc->add_option("--max-drivers", limits.max_drivers)->capture_default_str();
  orc->add_option("--max-expansions", limits.max_expansions)->capture_default_str();
  orc->add_option("--out", orc_out)->capture_default_str();

  // plot-data
  auto* plot = app.add_subcommand("plot-data", "Export reward curves and route polylines");
  std::vector<std::string> plot_stats, plot_labels;
  std::string plot_curve_out = "rewards.csv", plot_instance, plot_method = "greedy", plot_checkpoint,
              plot_routes_out = "routes.json";
  plot->add_option("--stats", plot_stats, "TrainStats CSV files");
  plot->add_option("--labels", plot_labels, "One label per --stats file");
  plot->add_option("--curve-out", plot_curve_out)->capture_default_str();
  plot->add_option("--instance", plot_instance, "Instance whose route to export");
  plot->add_option("--method", plot_method, "greedy | random | oracle | rl | <checkpoint path>")->capture_default_str();
  plot->add_option("--checkpoint", plot_checkpoint);
  plot->add_option("--routes-out", plot_routes_out)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUsageExit;
  }

  try {
    if (*gen) {
      const Difficulty level = parse_difficulty(gen_level);
      if (gen_count < 0) throw ConfigError("--count must be non-negative");
      fs::create_directories(gen_out);
      for (int i = 0; i < gen_count; ++i) {
        const std::uint64_t seed = gen_seed + static_cast<std::uint64_t>(i);
        const NetworkInstance inst = generate_instance(seed, gen_n, level, gen_shuttles, gen_drivers);
        save_instance(inst, fs::path(gen_out) / ("instance_" + std::to_string(seed) + ".json"));
      }
      std::cerr << "wrote " << gen_count << " instances to " << gen_out << '\n';
    } else if (*tr) {
      TrainConfig config = tr_config.empty() ? TrainConfig{} : train_config_from_json(read_file(tr_config));
      if (tr_epochs) config.epochs = *tr_epochs;
      if (tr_batch) config.batch_size = *tr_batch;
      if (tr_seed) config.seed = *tr_seed;
      if (!tr_flavor.empty()) config.flavor = parse_flavor(tr_flavor);
      if (tr_n) config.sizes = {*tr_n};
      if (!tr_sizes.empty()) config.sizes = tr_sizes;
      if (!tr_levels.empty()) {
        config.difficulties.clear();
        for (const auto& l : tr_levels) config.difficulties.push_back(parse_difficulty(l));
      }
      if (tr_shuttles) config.num_shuttles = *tr_shuttles;
      if (tr_drivers) config.drivers_per_shuttle = *tr_drivers;
      if (tr_lr) config.lr_actor = *tr_lr;
      if (tr_lr_critic) config.lr_critic = *tr_lr_critic;
      if (tr_clip) config.clip_norm = *tr_clip;
      if (tr_lr_final) config.lr_final_fraction = *tr_lr_final;
      if (tr_every) config.checkpoint_every = *tr_every;
      if (tr_no_distance) config.use_distance = false;
      config.checkpoint_path = tr_checkpoint;
      config.validate();

      std::ofstream stats(tr_stats);
      if (!stats) throw ConfigError("cannot write " + tr_stats);
      stats << "epoch,mean_R,mean_advantage,critic_loss,seconds\n";
      const TrainResult result = train(config, [&](const EpochStats& s) {
        std::vector<EpochStats> one{s};
        std::ostringstream row;
        write_stats_csv(row, one);
        const std::string text = row.str();
        stats << text.substr(text.find('\n') + 1) << std::flush;
        std::cerr << "epoch " << s.epoch << " mean_R " << s.mean_reward << " critic_loss " << s.critic_loss
                  << '\n';
      });
      std::cerr << "final 20-epoch mean reward " << final_mean_reward(result.stats) << "; checkpoint "
                << tr_checkpoint << '\n';
    } else if (*ev) {
      if (ev_greedy) ev_method = "greedy";
      const auto instances = load_instances(ev_inputs, {ev_shuttles, ev_drivers});
      const Method m = resolve_method(ev_method, ev_checkpoint, ev_seed);
      const auto rows = run_method(m, instances, ev_max_steps, ev_trace);
      write_rows(ev_out, rows);
      print_summary(rows);
    } else if (*cmp) {
      const auto instances = load_instances(cmp_inputs, {cmp_shuttles, cmp_drivers});
      const auto a = run_method(resolve_method(cmp_a, "", cmp_seed), instances, 0, "");
      const auto b = run_method(resolve_method(cmp_b, "", cmp_seed), instances, 0, "");
      std::vector<ResultRow> both = a;
      both.insert(both.end(), b.begin(), b.end());
      write_rows(cmp_out, both);
      const ResultSummary sa = summarize(a), sb = summarize(b);
      std::cout << "method_a,mean_a,method_b,mean_b,win_pct\n"
                << sa.method << ',' << sa.mean_makespan << ',' << sb.method << ',' << sb.mean_makespan << ','
                << win_percentage(a, b) << '\n';
    } else if (*orc) {
      const auto instances = load_instances(orc_inputs, {});
      std::vector<ResultRow> rows;
      for (const NetworkInstance& inst : instances) {
        Environment env(std::make_shared<const NetworkInstance>(inst));
        const auto start = std::chrono::steady_clock::now();
        const OracleResult best = oracle_optimal(env, limits);
        ResultRow row;
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        Environment replay_env(std::make_shared<const NetworkInstance>(inst));
        const Trajectory t = replay_actions(replay_env, best.dispatches);
        row.seed = inst.seed();
        row.method = "oracle";
        row.makespan = best.makespan;
        row.decision_events = t.decision_events;
        rows.push_back(row);
        std::cerr << "seed " << inst.seed() << ": makespan " << best.makespan << " after " << best.expansions
                  << " expansions; route";
        for (const auto& [s, n] : best.dispatches) std::cerr << ' ' << s << ':' << n;
        std::cerr << '\n';
      }
      write_rows(orc_out, rows);
    } else if (*plot) {
      if (plot_stats.empty() && plot_instance.empty()) throw ConfigError("plot-data needs --stats or --instance");
      if (!plot_stats.empty()) {
        if (!plot_labels.empty() && plot_labels.size() != plot_stats.size())
          throw ConfigError("--labels needs one entry per --stats file");
        std::ofstream out(plot_curve_out);
        if (!out) throw ConfigError("cannot write " + plot_curve_out);
        out << "label,epoch,mean_R\n";
        for (std::size_t i = 0; i < plot_stats.size(); ++i) {
          const std::string label = plot_labels.empty() ? fs::path(plot_stats[i]).stem().string() : plot_labels[i];
          std::istringstream in(read_file(plot_stats[i]));
          std::string line;
          std::getline(in, line);
          if (line.rfind("epoch,mean_R", 0) != 0) throw ParseError(plot_stats[i] + ": not a TrainStats CSV");
          while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream row(line);
            std::string epoch, reward;
            std::getline(row, epoch, ',');
            std::getline(row, reward, ',');
            out << label << ',' << epoch << ',' << reward << '\n';
          }
        }
      }
      if (!plot_instance.empty()) {
        const NetworkInstance inst = load_instance(plot_instance);
        Environment env(std::make_shared<const NetworkInstance>(inst));
        const Method m = resolve_method(plot_method, plot_checkpoint, 1);
        Trajectory t;
        if (m.name == "greedy") {
          t = greedy_baseline(env);
        } else if (m.name == "random") {
          std::mt19937_64 rng(m.seed);
          t = random_policy(env, rng);
        } else if (m.name == "oracle") {
          const OracleResult best = oracle_optimal(env);
          Environment fresh(std::make_shared<const NetworkInstance>(inst));
          t = replay_actions(fresh, best.dispatches);
        } else {
          std::mt19937_64 unused(0);
          t = rollout_fleet(*m.actor, env, DecodeMode::Greedy, unused).trajectory;
        }
        std::ofstream out(plot_routes_out);
        if (!out) throw ConfigError("cannot write " + plot_routes_out);
        out << route_json(inst, t).dump(2) << '\n';
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailureExit;
  }
  return 0;
}
