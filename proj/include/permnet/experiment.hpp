#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "permnet/env.hpp"
#include "permnet/learner.hpp"
#include "permnet/mixer.hpp"
#include "permnet/networks.hpp"

namespace permnet {

// Process exit codes of the experiment runner.
namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kUnknownName = 2;
inline constexpr int kUnwritableOutput = 3;
inline constexpr int kMismatchedGrids = 4;
inline constexpr int kOutputExists = 5;
}  // namespace exit_code

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
  Architecture architecture = Architecture::kHpn;
  MixerKind mixer = MixerKind::kVdn;
  std::string preset = "3v3";
  bool shuffle = false;  // train and evaluate behind ShuffleWrapper
  TrainConfig train;
  NetworkConfig network;
  std::size_t eval_interval = 1000;
  std::size_t eval_episodes = 32;
  std::size_t train_steps_per_round = 1;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::string tag;  // defaults to "<architecture>_<mixer>"

  std::string effective_tag() const;
  BattleConfig battle() const;
  // key = value lines for every field, in a fixed order.
  std::string to_text() const;
};

// Flat "key = value" lines; '#' starts a comment. Throws ConfigError on
// malformed lines, unknown keys or bad values, UnknownNameError on unknown
// architecture or mixer names.
std::map<std::string, std::string> parse_key_values(const std::string& text);
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// "0,1,2" or "0-4" or a mix, e.g. "0-2,7".
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

struct EvalRow {
  std::size_t env_steps = 0;
  double win_rate = 0.0;
  double loss = 0.0;
};

inline constexpr const char* kCurveHeader = "env_steps,win_rate,loss";
inline constexpr const char* kSummaryHeader = "env_steps,median,p25,p75";

std::string format_curve(const std::vector<EvalRow>& rows);

// Called after every evaluation with the rows so far.
using EvalCallback = std::function<void(const std::vector<EvalRow>&)>;

// Trains one seed to train.total_env_steps, evaluating every eval_interval
// env steps. Returns one row per evaluation. `on_finish` sees the trained
// learner.
std::vector<EvalRow> train_seed(const ExperimentConfig& config, std::uint64_t seed,
                                const EvalCallback& on_eval = {},
                                const std::function<void(const Learner&)>& on_finish = {});

std::filesystem::path curve_path(const std::filesystem::path& out_dir, const std::string& tag,
                                 std::uint64_t seed);

// Writes `content` to `path` through a temporary file and a rename.
void write_file_atomically(const std::filesystem::path& path, const std::string& content);

struct RunOptions {
  std::filesystem::path out_dir = "results";
  bool overwrite = false;
  std::size_t jobs = 1;
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints
  std::ostream* log = nullptr;
};

// Runs every seed of the config; returns an exit code.
int run_experiment(const ExperimentConfig& config, const RunOptions& options);

// Linear-interpolation percentile (q in [0, 1]) of unsorted values.
double percentile(std::vector<double> values, double q);

struct Curve {
  std::vector<std::size_t> env_steps;
  std::vector<double> win_rate;
};

Curve read_curve(const std::filesystem::path& path);

class GridMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Summary CSV text over curves sharing one env_steps grid.
std::string aggregate_curves(const std::vector<Curve>& curves);

// First evaluated env_steps from which the win rate stays >= threshold for
// `window` consecutive evaluations (fewer if the run ends first). Returns
// SIZE_MAX if never.
std::size_t steps_to_sustain(const Curve& curve, double threshold, std::size_t window = 3);

}  // namespace permnet
