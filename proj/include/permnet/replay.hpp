#pragma once

#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include "permnet/env.hpp"
#include "permnet/observation.hpp"
#include "permnet/rng.hpp"

namespace permnet {

struct Transition {
  std::vector<ObservationSet> observations;  // per agent
  std::vector<double> state;
  std::vector<int> actions;
  double reward = 0.0;
  std::vector<ActionMask> available;
  bool terminal = false;
};

// One episode in flat storage. Observations, states and masks hold T + 1
// entries (the last one is the post-episode view used for bootstrapping);
// actions and rewards hold T.
struct Episode {
  ObsLayout layout;
  std::size_t n_agents = 0;
  std::size_t state_dim = 0;
  std::size_t length = 0;
  bool terminated = false;  // ended by elimination, not by the time limit
  bool won = false;

  std::vector<double> obs;           // (T+1, n_agents, obs_dim)
  std::vector<double> states;        // (T+1, state_dim)
  std::vector<unsigned char> avail;  // (T+1, n_agents, n_actions)
  std::vector<int> actions;          // (T, n_agents)
  std::vector<double> rewards;       // (T)

  Episode() = default;
  Episode(const ObsLayout& layout, std::size_t n_agents, std::size_t state_dim);

  // Appends the view at time t (observations, state, masks).
  void push_view(const std::vector<ObservationSet>& observations, std::span<const double> state,
                 const std::vector<ActionMask>& masks);
  void push_step(std::span<const int> joint_actions, double reward);

  std::span<const double> obs_at(std::size_t t, std::size_t agent) const;
  std::span<const double> state_at(std::size_t t) const;
  std::span<const unsigned char> avail_at(std::size_t t, std::size_t agent) const;
  int action_at(std::size_t t, std::size_t agent) const;

  // Time t as a Transition; terminal is set on the last step of a
  // terminated episode.
  Transition transition(std::size_t t) const;

  bool operator==(const Episode&) const = default;
};

using EpisodeBatch = std::vector<Episode>;

// Fixed-capacity store of whole episodes; the oldest is evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Episode episode);
  std::size_t size() const { return episodes_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Episode& at(std::size_t i) const { return episodes_.at(i); }

  // `count` distinct episodes chosen uniformly (all of them if fewer).
  std::vector<const Episode*> sample(std::size_t count, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<Episode> episodes_;
};

// Relabels an episode by an ally-row order and an enemy order: in the result,
// every agent's ally row i is the original row ally_perm[i], enemy row j is
// the original enemy row enemy_perm[j], the state's enemy blocks follow the
// same enemy order, and attack actions and attack masks are re-indexed so
// each transition means the same thing as before.
Episode permute_episode(const Episode& episode, std::span<const std::size_t> ally_perm,
                        std::span<const std::size_t> enemy_perm, std::size_t n_allies_in_state);

// Returns the batch followed by `num_permutations` randomly relabelled copies
// of each episode (copy-major order).
EpisodeBatch augment_experience(const EpisodeBatch& batch, std::size_t num_permutations,
                                std::size_t n_allies_in_state, Rng& rng);

}  // namespace permnet
