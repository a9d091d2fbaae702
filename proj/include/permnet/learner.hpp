#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "permnet/env.hpp"
#include "permnet/mixer.hpp"
#include "permnet/networks.hpp"
#include "permnet/optim.hpp"
#include "permnet/replay.hpp"

namespace permnet {

struct TrainConfig {
  double gamma = 0.99;
  double lr = 0.001;
  double td_lambda = 0.6;
  double epsilon_start = 1.0;
  double epsilon_finish = 0.05;
  std::size_t epsilon_anneal_steps = 100000;
  std::size_t buffer_size = 5000;
  std::size_t batch_episodes = 32;
  std::size_t target_update_interval = 200;  // training steps
  std::size_t parallel_runners = 8;
  std::size_t mixing_embed_dim = 32;
  std::size_t hypernet_embed = 64;
  std::size_t total_env_steps = 200000;
  std::uint64_t seed = 0;
  double grad_clip = 10.0;
  bool augment = false;
  std::size_t num_permutations = 1;

  void validate() const;
};

// Backward-view lambda-returns for one episode:
//   G_t = r_t + gamma * ((1 - lambda) V_{t+1} + lambda G_{t+1}),  G_T = V_T,
// where next_values[t] = V_{t+1}. If `terminated`, V_T is taken as 0.
std::vector<double> td_lambda_targets(std::span<const double> rewards,
                                      std::span<const double> next_values, bool terminated,
                                      double gamma, double lambda);

struct EpsilonSchedule {
  double start = 1.0;
  double finish = 0.05;
  std::size_t anneal_steps = 100000;

  double value(std::size_t env_steps) const;
};

// With probability epsilon a uniformly random available action, otherwise
// the first maximal Q among available actions.
int epsilon_greedy_select(std::span<const double> q, std::span<const unsigned char> available,
                          double epsilon, Rng& rng);

// Shared agent network plus mixer, their target copies and the optimiser.
class Learner {
 public:
  Learner(Architecture arch, MixerKind mixer, const BattleConfig& battle, const TrainConfig& train,
          const NetworkConfig& network);

  // One double-Q TD(lambda) update on the batch. Returns the loss before the
  // update.
  double train_step(std::span<const Episode* const> batch);

  void update_targets();

  const AgentNetwork& agent() const { return *agent_; }
  AgentNetwork& agent() { return *agent_; }
  const Mixer& mixer() const { return *mixer_; }
  Mixer& mixer() { return *mixer_; }
  const AgentNetwork& target_agent() const { return *target_agent_; }
  std::size_t train_steps() const { return train_steps_; }
  const TrainConfig& config() const { return train_; }

  // Agent parameters under "agent.", mixer parameters under "mixer.".
  std::vector<NamedParameter> parameters() const;

 private:
  TrainConfig train_;
  std::size_t n_agents_;
  std::size_t n_allies_state_;
  std::unique_ptr<AgentNetwork> agent_;
  std::unique_ptr<AgentNetwork> target_agent_;
  std::unique_ptr<Mixer> mixer_;
  std::unique_ptr<Mixer> target_mixer_;
  std::vector<NamedParameter> params_;
  AdamState adam_;
  Rng noise_rng_;
  Rng augment_rng_;
  std::size_t train_steps_ = 0;
};

}  // namespace permnet
