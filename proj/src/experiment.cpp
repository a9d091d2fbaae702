#include "permnet/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "permnet/checkpoint.hpp"
#include "permnet/rollout.hpp"

namespace permnet {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used == v.size() && x >= 0) return static_cast<std::size_t>(x);
  } catch (const std::exception&) {
  }
  throw ConfigError("config: " + key + " expects a non-negative integer, got '" + v + "'");
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError("config: " + key + " expects a number, got '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config: " + key + " expects true or false, got '" + v + "'");
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

std::string ExperimentConfig::effective_tag() const {
  if (!tag.empty()) return tag;
  return std::string(architecture_name(architecture)) + "_" + std::string(mixer_name(mixer));
}

BattleConfig ExperimentConfig::battle() const { return battle_preset(preset); }

std::string ExperimentConfig::to_text() const {
  std::ostringstream o;
  const TrainConfig& t = train;
  o << "architecture = " << architecture_name(architecture) << '\n'
    << "mixer = " << mixer_name(mixer) << '\n'
    << "preset = " << preset << '\n'
    << "shuffle = " << (shuffle ? "true" : "false") << '\n'
    << "augment = " << (t.augment ? "true" : "false") << '\n'
    << "num_permutations = " << t.num_permutations << '\n'
    << "gamma = " << fmt(t.gamma) << '\n'
    << "lr = " << fmt(t.lr) << '\n'
    << "td_lambda = " << fmt(t.td_lambda) << '\n'
    << "epsilon_start = " << fmt(t.epsilon_start) << '\n'
    << "epsilon_finish = " << fmt(t.epsilon_finish) << '\n'
    << "epsilon_anneal_steps = " << t.epsilon_anneal_steps << '\n'
    << "buffer_size = " << t.buffer_size << '\n'
    << "batch_episodes = " << t.batch_episodes << '\n'
    << "target_update_interval = " << t.target_update_interval << '\n'
    << "parallel_runners = " << t.parallel_runners << '\n'
    << "mixing_embed_dim = " << t.mixing_embed_dim << '\n'
    << "hypernet_embed = " << t.hypernet_embed << '\n'
    << "total_env_steps = " << t.total_env_steps << '\n'
    << "grad_clip = " << fmt(t.grad_clip) << '\n'
    << "hpn_embed_dim = " << network.hpn.embed_dim << '\n'
    << "hpn_hidden_dim = " << network.hpn.hyper_hidden_dim << '\n'
    << "hpn_layer_num = " << network.hpn.hyper_layer_num << '\n'
    << "permutation_net_dim = " << network.dpn.permutation_net_dim << '\n'
    << "dpn_hidden_dim = " << network.dpn.hidden_dim << '\n'
    << "softmax_tau = " << fmt(network.dpn.tau) << '\n'
    << "deepset_embed_dim = " << network.deepset.embed_dim << '\n'
    << "pooling = "
    << (network.deepset.pooling == Pooling::kSum    ? "sum"
        : network.deepset.pooling == Pooling::kMean ? "mean"
                                                    : "max")
    << '\n'
    << "concat_hidden = " << network.concat_hidden << '\n'
    << "eval_interval = " << eval_interval << '\n'
    << "eval_episodes = " << eval_episodes << '\n'
    << "train_steps_per_round = " << train_steps_per_round << '\n'
    << "seeds = ";
  for (std::size_t i = 0; i < seeds.size(); ++i) o << (i ? "," : "") << seeds[i];
  o << '\n' << "tag = " << effective_tag() << '\n';
  return o.str();
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(number) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& v) {
  TrainConfig& t = c.train;
  if (key == "architecture") c.architecture = parse_architecture(v);
  else if (key == "mixer") c.mixer = parse_mixer(v);
  else if (key == "preset" || key == "env") {
    battle_preset(v);
    c.preset = v;
  }
  else if (key == "shuffle") c.shuffle = to_bool(key, v);
  else if (key == "augment") t.augment = to_bool(key, v);
  else if (key == "num_permutations") t.num_permutations = to_size(key, v);
  else if (key == "gamma") t.gamma = to_double(key, v);
  else if (key == "lr") t.lr = to_double(key, v);
  else if (key == "td_lambda") t.td_lambda = to_double(key, v);
  else if (key == "epsilon_start") t.epsilon_start = to_double(key, v);
  else if (key == "epsilon_finish") t.epsilon_finish = to_double(key, v);
  else if (key == "epsilon_anneal_steps") t.epsilon_anneal_steps = to_size(key, v);
  else if (key == "buffer_size") t.buffer_size = to_size(key, v);
  else if (key == "batch_episodes") t.batch_episodes = to_size(key, v);
  else if (key == "target_update_interval") t.target_update_interval = to_size(key, v);
  else if (key == "parallel_runners") t.parallel_runners = to_size(key, v);
  else if (key == "mixing_embed_dim") t.mixing_embed_dim = to_size(key, v);
  else if (key == "hypernet_embed") t.hypernet_embed = to_size(key, v);
  else if (key == "total_env_steps") t.total_env_steps = to_size(key, v);
  else if (key == "grad_clip") t.grad_clip = to_double(key, v);
  else if (key == "hpn_embed_dim") c.network.hpn.embed_dim = to_size(key, v);
  else if (key == "hpn_hidden_dim") c.network.hpn.hyper_hidden_dim = to_size(key, v);
  else if (key == "hpn_layer_num") c.network.hpn.hyper_layer_num = to_size(key, v);
  else if (key == "permutation_net_dim") c.network.dpn.permutation_net_dim = to_size(key, v);
  else if (key == "dpn_hidden_dim") c.network.dpn.hidden_dim = to_size(key, v);
  else if (key == "softmax_tau") c.network.dpn.tau = to_double(key, v);
  else if (key == "deepset_embed_dim") c.network.deepset.embed_dim = to_size(key, v);
  else if (key == "pooling") {
    try {
      c.network.deepset.pooling = parse_pooling(v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  else if (key == "concat_hidden") c.network.concat_hidden = to_size(key, v);
  else if (key == "eval_interval") c.eval_interval = to_size(key, v);
  else if (key == "eval_episodes") c.eval_episodes = to_size(key, v);
  else if (key == "train_steps_per_round") c.train_steps_per_round = to_size(key, v);
  else if (key == "seeds" || key == "seed") c.seeds = parse_seed_list(v);
  else if (key == "tag") c.tag = v;
  else throw ConfigError("config: unknown key '" + key + "'");
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  ExperimentConfig config;
  for (const auto& [key, value] : parse_key_values(text)) apply_setting(config, key, value);
  if (config.eval_interval == 0) throw ConfigError("config: eval_interval must be positive");
  config.train.validate();
  return config;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_experiment_config(text.str());
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto dash = item.find('-', 1);
    if (dash == std::string::npos) {
      seeds.push_back(to_size("seeds", item));
    } else {
      const auto lo = to_size("seeds", trim(item.substr(0, dash)));
      const auto hi = to_size("seeds", trim(item.substr(dash + 1)));
      if (hi < lo) throw ConfigError("seeds: empty range '" + item + "'");
      for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    }
  }
  if (seeds.empty()) throw ConfigError("seeds: empty list");
  return seeds;
}

std::string format_curve(const std::vector<EvalRow>& rows) {
  std::string out = std::string(kCurveHeader) + "\n";
  char line[128];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%zu,%.6f,%.6f\n", r.env_steps, r.win_rate, r.loss);
    out += line;
  }
  return out;
}

std::vector<EvalRow> train_seed(const ExperimentConfig& config, std::uint64_t seed,
                                const EvalCallback& on_eval,
                                const std::function<void(const Learner&)>& on_finish) {
  TrainConfig train = config.train;
  train.seed = seed;
  const BattleConfig battle = config.battle();
  Learner learner(config.architecture, config.mixer, battle, train, config.network);
  ReplayBuffer buffer(train.buffer_size);
  Rng sample_rng(Rng::derive(seed, 0x5A3B1E));
  const EpsilonSchedule epsilon{train.epsilon_start, train.epsilon_finish,
                                train.epsilon_anneal_steps};

  const std::size_t runners = train.parallel_runners;
  std::vector<std::unique_ptr<Environment>> envs;
  std::vector<Rng> runner_rngs;
  for (std::size_t r = 0; r < runners; ++r) {
    envs.push_back(make_environment(battle, config.shuffle, Rng::derive(seed ^ 0x5F0FF1E, r)));
    runner_rngs.emplace_back(Rng::derive(seed, r));
  }
  auto eval_env = make_environment(battle, config.shuffle, Rng::derive(seed, 0xE7A15F));
  const std::uint64_t eval_seed = Rng::derive(seed, 0xE7A1);
  const std::uint64_t episode_seed = Rng::derive(seed, 0xE915);

  std::vector<EvalRow> rows;
  std::size_t env_steps = 0;
  std::size_t episodes = 0;
  std::size_t next_eval = config.eval_interval;
  double loss_sum = 0.0;
  std::size_t loss_count = 0;
  double last_loss = 0.0;

  while (next_eval <= train.total_env_steps) {
    // One round: every runner plays one episode; merged in runner order.
    const double eps = epsilon.value(env_steps);
    std::vector<Episode> collected(runners);
    auto play = [&](std::size_t r) {
      collected[r] = collect_episode(*envs[r], Rng::derive(episode_seed, episodes + r),
                                     learner.agent(), eps, false, runner_rngs[r]);
    };
    if (runners == 1) {
      play(0);
    } else {
      std::vector<std::thread> threads;
      for (std::size_t r = 0; r < runners; ++r) threads.emplace_back(play, r);
      for (auto& t : threads) t.join();
    }
    for (auto& e : collected) {
      env_steps += e.length;
      buffer.push(std::move(e));
    }
    episodes += runners;

    if (buffer.size() >= train.batch_episodes) {
      for (std::size_t k = 0; k < config.train_steps_per_round; ++k) {
        const auto batch = buffer.sample(train.batch_episodes, sample_rng);
        last_loss = learner.train_step(batch);
        loss_sum += last_loss;
        ++loss_count;
      }
    }

    while (next_eval <= train.total_env_steps && env_steps >= next_eval) {
      EvalRow row;
      row.env_steps = next_eval;
      row.win_rate = evaluate(greedy_policy(learner.agent()), *eval_env, config.eval_episodes,
                              eval_seed);
      row.loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : last_loss;
      loss_sum = 0.0;
      loss_count = 0;
      rows.push_back(row);
      if (on_eval) on_eval(rows);
      next_eval += config.eval_interval;
    }
  }
  if (on_finish) on_finish(learner);
  return rows;
}

std::filesystem::path curve_path(const std::filesystem::path& out_dir, const std::string& tag,
                                 std::uint64_t seed) {
  return out_dir / (tag + "_seed" + std::to_string(seed) + ".csv");
}

void write_file_atomically(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

int run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(options.out_dir, ec);
  const fs::path probe = options.out_dir / ".permnet_write_probe";
  {
    std::ofstream out(probe);
    if (!out) {
      if (options.log) *options.log << "error: cannot write to " << options.out_dir << '\n';
      return exit_code::kUnwritableOutput;
    }
  }
  fs::remove(probe, ec);

  const std::string tag = config.effective_tag();
  if (!options.overwrite) {
    for (auto seed : config.seeds) {
      const fs::path p = curve_path(options.out_dir, tag, seed);
      if (fs::exists(p)) {
        if (options.log) {
          *options.log << "error: " << p.string() << " exists (pass --overwrite to replace)\n";
        }
        return exit_code::kOutputExists;
      }
    }
  }
  if (!options.checkpoint_dir.empty()) fs::create_directories(options.checkpoint_dir, ec);

  std::mutex log_mutex;
  std::atomic<int> status{exit_code::kOk};
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= config.seeds.size()) return;
      const std::uint64_t seed = config.seeds[i];
      const fs::path path = curve_path(options.out_dir, tag, seed);
      try {
        auto on_eval = [&](const std::vector<EvalRow>& rows) {
          write_file_atomically(path, format_curve(rows));
          if (options.log) {
            std::lock_guard lock(log_mutex);
            const EvalRow& r = rows.back();
            char line[160];
            std::snprintf(line, sizeof line, "%s seed %llu: %zu steps, win %.3f, loss %.4f\n",
                          tag.c_str(), static_cast<unsigned long long>(seed), r.env_steps,
                          r.win_rate, r.loss);
            *options.log << line << std::flush;
          }
        };
        auto on_finish = [&](const Learner& learner) {
          if (options.checkpoint_dir.empty()) return;
          save_checkpoint(options.checkpoint_dir / (tag + "_seed" + std::to_string(seed) + ".ckpt"),
                          config.to_text(), learner.parameters());
        };
        const auto rows = train_seed(config, seed, on_eval, on_finish);
        write_file_atomically(path, format_curve(rows));
      } catch (const std::exception& e) {
        std::lock_guard lock(log_mutex);
        if (options.log) *options.log << "error: seed " << seed << ": " << e.what() << '\n';
        status = exit_code::kUsage;
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, config.seeds.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  return status;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile: no values");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

Curve read_curve(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCurveHeader) {
    throw std::runtime_error(path.string() + ": missing header " + kCurveHeader);
  }
  Curve curve;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    std::string steps, win;
    std::getline(fields, steps, ',');
    std::getline(fields, win, ',');
    curve.env_steps.push_back(to_size("env_steps", trim(steps)));
    curve.win_rate.push_back(to_double("win_rate", trim(win)));
  }
  return curve;
}

std::string aggregate_curves(const std::vector<Curve>& curves) {
  if (curves.empty()) throw std::invalid_argument("aggregate: no input curves");
  for (const auto& c : curves) {
    if (c.env_steps != curves.front().env_steps) {
      throw GridMismatch("aggregate: input files do not share one env_steps grid");
    }
  }
  std::string out = std::string(kSummaryHeader) + "\n";
  char line[128];
  for (std::size_t i = 0; i < curves.front().env_steps.size(); ++i) {
    std::vector<double> values;
    for (const auto& c : curves) values.push_back(c.win_rate[i]);
    std::snprintf(line, sizeof line, "%zu,%.6f,%.6f,%.6f\n", curves.front().env_steps[i],
                  percentile(values, 0.5), percentile(values, 0.25), percentile(values, 0.75));
    out += line;
  }
  return out;
}

std::size_t steps_to_sustain(const Curve& curve, double threshold, std::size_t window) {
  const std::size_t n = curve.win_rate.size();
  for (std::size_t i = 0; i < n; ++i) {
    bool ok = true;
    for (std::size_t j = i; j < std::min(n, i + window); ++j) ok = ok && curve.win_rate[j] >= threshold;
    if (ok) return curve.env_steps[i];
  }
  return std::numeric_limits<std::size_t>::max();
}

}  // namespace permnet
