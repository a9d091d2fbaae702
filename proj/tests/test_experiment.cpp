#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "permnet/checkpoint.hpp"
#include "permnet/experiment.hpp"
#include "permnet/networks.hpp"

using namespace permnet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("permnet_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

ExperimentConfig tiny_config() {
  return parse_experiment_config(
      "architecture = concat\n"
      "mixer = vdn\n"
      "total_env_steps = 5000\n"
      "eval_interval = 1000\n"
      "eval_episodes = 8\n"
      "batch_episodes = 8\n"
      "seeds = 0,1\n");
}

#ifdef PERMNET_CLI_PATH
int run_cli(const std::string& args) {
  const std::string cmd = std::string(PERMNET_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string cli_stderr(const std::string& args) {
  TempDir dir;
  const fs::path err = dir.path / "stderr.txt";
  const std::string cmd = std::string(PERMNET_CLI_PATH) + " " + args + " > /dev/null 2> " + err.string();
  (void)std::system(cmd.c_str());
  return slurp(err);
}
#endif

}  // namespace

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse_experiment_config(
      "# comment\n"
      "architecture = dpn\n"
      "mixer=qmix\n"
      "augment = true\n"
      "td_lambda = 0.8\n"
      "softmax_tau = 0.25\n"
      "seeds = 0-2,7\n");
  CHECK(c.architecture == Architecture::kDpn);
  CHECK(c.mixer == MixerKind::kQmix);
  CHECK(c.train.augment);
  CHECK(c.train.td_lambda == 0.8);
  CHECK(c.network.dpn.tau == 0.25);
  CHECK(c.seeds == std::vector<std::uint64_t>{0, 1, 2, 7});
  CHECK(c.effective_tag() == "dpn_qmix");
  CHECK(parse_experiment_config(c.to_text()).to_text() == c.to_text());

  CHECK_THROWS_AS(parse_experiment_config("colour = blue"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config("td_lambda = 1.5"), std::invalid_argument);
  CHECK_THROWS_AS(parse_experiment_config("gamma"), ConfigError);
  try {
    parse_experiment_config("architecture = lstm");
    FAIL("expected an unknown-name error");
  } catch (const UnknownNameError& e) {
    CHECK(e.token() == "lstm");
  }
}

TEST_CASE("defaults") {
  const ExperimentConfig c;
  CHECK(c.train.gamma == 0.99);
  CHECK(c.train.lr == 0.001);
  CHECK(c.train.td_lambda == 0.6);
  CHECK(c.train.epsilon_anneal_steps == 100000);
  CHECK(c.train.buffer_size == 5000);
  CHECK(c.train.target_update_interval == 200);
  CHECK(c.train.parallel_runners == 8);
  CHECK(c.train.mixing_embed_dim == 32);
  CHECK(c.train.hypernet_embed == 64);
  CHECK(c.network.hpn.embed_dim == 64);
  CHECK(c.network.hpn.hyper_layer_num == 2);
  CHECK(c.network.dpn.permutation_net_dim == 8);
  CHECK(c.network.dpn.tau == 0.5);
  CHECK(c.eval_episodes == 32);
}

TEST_CASE("run writes one curve per seed, reproducibly") {
  TempDir a;
  TempDir b;
  const ExperimentConfig config = tiny_config();
  REQUIRE(run_experiment(config, {a.path, false, 1, {}, nullptr}) == exit_code::kOk);
  REQUIRE(run_experiment(config, {b.path, false, 2, {}, nullptr}) == exit_code::kOk);
  for (std::uint64_t seed : config.seeds) {
    const fs::path pa = curve_path(a.path, "concat_vdn", seed);
    const std::string text = slurp(pa);
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    CHECK(line == kCurveHeader);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
      ++rows;
      const double win = std::stod(line.substr(line.find(',') + 1));
      CHECK(win >= 0.0);
      CHECK(win <= 1.0);
    }
    CHECK(rows == 5);
    CHECK(slurp(curve_path(b.path, "concat_vdn", seed)) == text);
  }
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a.path)) files += entry.path().extension() == ".csv";
  CHECK(files == 2);
}

TEST_CASE("run refuses to clobber and reports unwritable output") {
  TempDir dir;
  ExperimentConfig config = tiny_config();
  config.train.total_env_steps = 1000;
  config.seeds = {0};
  REQUIRE(run_experiment(config, {dir.path, false, 1, {}, nullptr}) == exit_code::kOk);
  CHECK(run_experiment(config, {dir.path, false, 1, {}, nullptr}) == exit_code::kOutputExists);
  CHECK(run_experiment(config, {dir.path, true, 1, {}, nullptr}) == exit_code::kOk);

  const fs::path blocker = dir.path / "file";
  write(blocker, "x");
  CHECK(run_experiment(config, {blocker / "sub", false, 1, {}, nullptr}) ==
        exit_code::kUnwritableOutput);
}

TEST_CASE("checkpoints round-trip") {
  TempDir dir;
  ExperimentConfig config = tiny_config();
  config.train.total_env_steps = 1000;
  config.seeds = {3};
  REQUIRE(run_experiment(config, {dir.path, false, 1, dir.path / "ck", nullptr}) == exit_code::kOk);
  fs::path file;
  for (const auto& entry : fs::directory_iterator(dir.path / "ck")) file = entry.path();
  REQUIRE(!file.empty());
  const Checkpoint ck = load_checkpoint(file);
  CHECK(parse_experiment_config(ck.config_text).to_text() == config.to_text());

  Rng rng(0);
  auto net = make_agent_network(Architecture::kConcat, config.battle().layout(), config.network, rng);
  auto params = net->parameters();
  for (auto& p : params) p.name = "agent." + p.name;
  restore_parameters(ck, params);
  for (const auto& [name, tensor] : ck.parameters) {
    for (const auto& p : params) {
      if (p.name == name) {
        CHECK(std::equal(p.tensor.data().begin(), p.tensor.data().end(), tensor.data().begin()));
      }
    }
  }

  const fs::path again = dir.path / "again.ckpt";
  save_checkpoint(again, ck.config_text, params);
  const Checkpoint reloaded = load_checkpoint(again);
  for (std::size_t i = 0; i < params.size(); ++i) {
    CHECK(reloaded.parameters[i].first == params[i].name);
    CHECK(reloaded.parameters[i].second.shape() == params[i].tensor.shape());
  }
  write(dir.path / "bad.ckpt", "nope");
  CHECK_THROWS(load_checkpoint(dir.path / "bad.ckpt"));
}

TEST_CASE("percentiles and aggregation") {
  CHECK(percentile({0.0, 0.5, 1.0}, 0.5) == 0.5);
  CHECK(percentile({1.0, 0.0, 0.5}, 0.25) == 0.25);
  CHECK(percentile({0.0, 0.5, 1.0}, 0.75) == 0.75);
  CHECK(percentile({0.3}, 0.25) == 0.3);

  const Curve one{{1000, 2000}, {0.25, 0.5}};
  CHECK(aggregate_curves({one}) ==
        "env_steps,median,p25,p75\n1000,0.250000,0.250000,0.250000\n2000,0.500000,0.500000,0.500000\n");
  const Curve a{{1000}, {0.0}};
  const Curve b{{1000}, {0.5}};
  const Curve c{{1000}, {1.0}};
  CHECK(aggregate_curves({a, b, c}) == "env_steps,median,p25,p75\n1000,0.500000,0.250000,0.750000\n");
  CHECK_THROWS_AS(aggregate_curves({one, a}), GridMismatch);
}

TEST_CASE("sustained win rate") {
  const Curve c{{1, 2, 3, 4, 5, 6}, {0.9, 0.5, 0.8, 0.85, 0.9, 0.7}};
  CHECK(steps_to_sustain(c, 0.8, 3) == 3);
  CHECK(steps_to_sustain(c, 0.8, 1) == 1);
  CHECK(steps_to_sustain(c, 0.95, 3) == SIZE_MAX);
  const Curve tail{{1, 2}, {0.1, 0.9}};
  CHECK(steps_to_sustain(tail, 0.8, 3) == 2);
}

TEST_CASE("seed lists") {
  CHECK(parse_seed_list("0-4") == std::vector<std::uint64_t>{0, 1, 2, 3, 4});
  CHECK(parse_seed_list("3") == std::vector<std::uint64_t>{3});
  CHECK_THROWS(parse_seed_list("4-2"));
  CHECK_THROWS(parse_seed_list("x"));
}

#ifdef PERMNET_CLI_PATH
TEST_CASE("command-line exit codes") {
  TempDir dir;
  CHECK(run_cli("params") == exit_code::kOk);
  CHECK(run_cli("run --set architecture=foo --out " + dir.path.string()) == exit_code::kUnknownName);
  CHECK(cli_stderr("run --set mixer=bar --out " + dir.path.string()).find("\nbar\n") !=
        std::string::npos);
  CHECK(run_cli("run --set colour=blue --out " + dir.path.string()) == exit_code::kUsage);

  write(dir.path / "blocker", "x");
  CHECK(run_cli("run --set total_env_steps=1000 --seeds 0 --out " + (dir.path / "blocker/sub").string()) ==
        exit_code::kUnwritableOutput);

  write(dir.path / "a.csv", "env_steps,win_rate,loss\n1000,0.5,0.1\n2000,0.5,0.1\n");
  write(dir.path / "b.csv", "env_steps,win_rate,loss\n1000,0.5,0.1\n3000,0.5,0.1\n");
  CHECK(run_cli("aggregate " + (dir.path / "a.csv").string() + " " + (dir.path / "b.csv").string()) ==
        exit_code::kMismatchedGrids);
  CHECK(run_cli("aggregate " + (dir.path / "a.csv").string() + " --out " +
                (dir.path / "summary.csv").string()) == exit_code::kOk);
  CHECK(slurp(dir.path / "summary.csv") ==
        "env_steps,median,p25,p75\n1000,0.500000,0.500000,0.500000\n2000,0.500000,0.500000,0.500000\n");

  const std::string cfg = (dir.path / "exp.cfg").string();
  write(cfg, "architecture = concat\ntotal_env_steps = 2000\neval_interval = 1000\neval_episodes = 4\n");
  const std::string out = (dir.path / "runs").string();
  CHECK(run_cli("run --config " + cfg + " --seeds 0 --quiet --out " + out) == exit_code::kOk);
  CHECK(fs::exists(dir.path / "runs" / "concat_vdn_seed0.csv"));
  CHECK(run_cli("run --config " + cfg + " --seeds 0 --quiet --out " + out) == exit_code::kOutputExists);
  CHECK(run_cli("trajectory --policy lookahead --seed 2 --out " + (dir.path / "t.tsv").string()) ==
        exit_code::kOk);
}
#endif
