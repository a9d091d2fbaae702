#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "permnet/checkpoint.hpp"
#include "permnet/experiment.hpp"
#include "permnet/rollout.hpp"
#include "permnet/scripted.hpp"

namespace fs = std::filesystem;
using namespace permnet;

namespace {

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides,
            const std::string& seeds, const RunOptions& options) {
  ExperimentConfig config;
  try {
    std::string text;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) {
        std::cerr << "error: cannot read config " << config_path << '\n';
        return exit_code::kUsage;
      }
      std::ostringstream buf;
      buf << in.rdbuf();
      text = buf.str();
    }
    for (const auto& o : overrides) text += "\n" + o;
    config = parse_experiment_config(text);
    if (const char* env = std::getenv("PERMNET_SEED"); env != nullptr && *env != '\0') {
      config.seeds = parse_seed_list(env);
    } else if (!seeds.empty()) {
      config.seeds = parse_seed_list(seeds);
    }
  } catch (const UnknownNameError& e) {
    std::cerr << "error: " << e.what() << '\n' << e.token() << '\n';
    return exit_code::kUnknownName;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code::kUsage;
  }
  return run_experiment(config, options);
}

int cmd_aggregate(const std::vector<std::string>& files, const std::string& out) {
  std::vector<Curve> curves;
  try {
    for (const auto& f : files) curves.push_back(read_curve(f));
    const std::string summary = aggregate_curves(curves);
    if (out.empty()) {
      std::cout << summary;
    } else {
      write_file_atomically(out, summary);
    }
  } catch (const GridMismatch& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code::kMismatchedGrids;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code::kUsage;
  }
  return exit_code::kOk;
}

int cmd_trajectory(const std::string& preset, const std::string& policy_name,
                   const std::string& checkpoint, std::uint64_t seed, bool shuffle,
                   const std::string& out) {
  try {
    const BattleConfig battle = battle_preset(preset);
    auto env = make_environment(battle, shuffle, Rng::derive(seed, 0x5F));
    std::unique_ptr<AgentNetwork> agent;
    JointPolicy policy;
    if (!checkpoint.empty()) {
      const Checkpoint ck = load_checkpoint(checkpoint);
      const ExperimentConfig config = parse_experiment_config(ck.config_text);
      Rng init(0);
      agent = make_agent_network(config.architecture, battle.layout(), config.network, init);
      std::vector<NamedParameter> params;
      agent->collect_parameters("agent.", params);
      restore_parameters(ck, params);
      policy = greedy_policy(*agent);
    } else if (policy_name == "focus_fire") {
      policy = [&battle](const Environment& e) {
        return focus_fire_policy(e.observations(), e.available_actions(), battle);
      };
    } else if (policy_name == "passive") {
      policy = [](const Environment& e) {
        return passive_policy(e.observations(), e.available_actions());
      };
    } else if (policy_name == "lookahead") {
      if (shuffle) throw std::invalid_argument("the lookahead policy needs the unshuffled env");
      policy = [](const Environment& e) {
        return lookahead_policy(static_cast<const BattleEnv&>(e));
      };
    } else {
      std::cerr << "error: unknown policy '" << policy_name << "'\n" << policy_name << '\n';
      return exit_code::kUnknownName;
    }
    if (out.empty()) {
      write_trajectory(std::cout, policy, *env, seed);
    } else {
      std::ofstream file(out);
      if (!file) {
        std::cerr << "error: cannot write " << out << '\n';
        return exit_code::kUnwritableOutput;
      }
      write_trajectory(file, policy, *env, seed);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code::kUsage;
  }
  return exit_code::kOk;
}

int cmd_params(const std::string& preset) {
  try {
    const BattleConfig battle = battle_preset(preset);
    NetworkConfig config;
    for (Architecture arch : all_architectures()) {
      Rng rng(0);
      const auto net = make_agent_network(arch, battle.layout(), config, rng);
      std::cout << architecture_name(arch) << ',' << count_parameters(*net) << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code::kUsage;
  }
  return exit_code::kOk;
}

}  // namespace

int main(int argc, char** argv) {
  // `permnet --config x.cfg ...` is shorthand for `permnet run --config x.cfg ...`.
  std::vector<std::string> args(argv + 1, argv + argc);
  if (!args.empty() && args.front().rfind("--", 0) == 0 && args.front() != "--help" &&
      args.front() != "--version") {
    args.insert(args.begin(), "run");
  }
  std::reverse(args.begin(), args.end());

  CLI::App app{"Permutation-invariant multi-agent Q-learning experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "permnet 0.1.0");

  std::string config_path, seeds, out_dir = "results", checkpoint_dir;
  std::vector<std::string> overrides;
  std::size_t jobs = 1;
  bool overwrite = false, quiet = false;
  auto* run = app.add_subcommand("run", "Train every seed of a config and write CSV curves");
  run->add_option("--config", config_path, "key = value config file");
  run->add_option("--out", out_dir, "Output directory")->capture_default_str();
  run->add_option("--seeds", seeds, "Seed list, e.g. 0-4 or 0,2,5");
  run->add_option("--jobs", jobs, "Seeds trained concurrently")->check(CLI::PositiveNumber);
  run->add_flag("--overwrite", overwrite, "Replace existing CSV files");
  run->add_option("--set", overrides, "Extra key=value settings, applied after the config");
  run->add_option("--checkpoint-dir", checkpoint_dir, "Save final parameters per seed here");
  run->add_flag("--quiet", quiet, "No progress lines");

  std::vector<std::string> files;
  std::string summary_out;
  auto* agg = app.add_subcommand("aggregate", "Median and 25/75 percentiles over seeds");
  agg->add_option("files", files, "Per-seed CSV files")->required();
  agg->add_option("--out", summary_out, "Summary file (default: stdout)");

  std::string preset = "3v3", policy = "focus_fire", checkpoint, traj_out;
  std::uint64_t seed = 0;
  bool shuffle = false;
  auto* traj = app.add_subcommand("trajectory", "Dump one episode as tab-separated lines");
  traj->add_option("--preset", preset)->capture_default_str();
  traj->add_option("--policy", policy, "focus_fire, passive or lookahead")->capture_default_str();
  traj->add_option("--checkpoint", checkpoint, "Play a trained network instead of a script");
  traj->add_option("--seed", seed)->capture_default_str();
  traj->add_flag("--shuffle", shuffle, "Wrap the environment in the shuffle wrapper");
  traj->add_option("--out", traj_out, "Output file (default: stdout)");

  std::string params_preset = "3v3";
  auto* params = app.add_subcommand("params", "Parameter count of every architecture");
  params->add_option("--preset", params_preset)->capture_default_str();

  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (*run) {
    RunOptions options;
    options.out_dir = out_dir;
    options.overwrite = overwrite;
    options.jobs = jobs;
    options.checkpoint_dir = checkpoint_dir;
    options.log = quiet ? nullptr : &std::cerr;
    return cmd_run(config_path, overrides, seeds, options);
  }
  if (*agg) return cmd_aggregate(files, summary_out);
  if (*traj) return cmd_trajectory(preset, policy, checkpoint, seed, shuffle, traj_out);
  if (*params) return cmd_params(params_preset);
  return exit_code::kUsage;
}
