#include "permnet/replay.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace permnet {

Episode::Episode(const ObsLayout& layout_, std::size_t n_agents_, std::size_t state_dim_)
    : layout(layout_), n_agents(n_agents_), state_dim(state_dim_) {}

void Episode::push_view(const std::vector<ObservationSet>& observations,
                        std::span<const double> state, const std::vector<ActionMask>& masks) {
  if (observations.size() != n_agents || masks.size() != n_agents || state.size() != state_dim) {
    throw std::invalid_argument("episode: view does not match the episode's agent count or state");
  }
  for (const auto& o : observations) {
    const auto flat = o.flatten();
    if (flat.size() != layout.obs_dim()) {
      throw std::invalid_argument("episode: observation width " + std::to_string(flat.size()) +
                                  " != " + std::to_string(layout.obs_dim()));
    }
    obs.insert(obs.end(), flat.begin(), flat.end());
  }
  states.insert(states.end(), state.begin(), state.end());
  for (const auto& m : masks) avail.insert(avail.end(), m.begin(), m.end());
}

void Episode::push_step(std::span<const int> joint_actions, double reward) {
  actions.insert(actions.end(), joint_actions.begin(), joint_actions.end());
  rewards.push_back(reward);
  ++length;
}

std::span<const double> Episode::obs_at(std::size_t t, std::size_t agent) const {
  const std::size_t d = layout.obs_dim();
  return std::span<const double>(obs).subspan((t * n_agents + agent) * d, d);
}

std::span<const double> Episode::state_at(std::size_t t) const {
  return std::span<const double>(states).subspan(t * state_dim, state_dim);
}

std::span<const unsigned char> Episode::avail_at(std::size_t t, std::size_t agent) const {
  const std::size_t a = layout.n_actions();
  return std::span<const unsigned char>(avail).subspan((t * n_agents + agent) * a, a);
}

int Episode::action_at(std::size_t t, std::size_t agent) const {
  return actions[t * n_agents + agent];
}

Transition Episode::transition(std::size_t t) const {
  if (t >= length) throw std::out_of_range("episode: step " + std::to_string(t));
  Transition tr;
  for (std::size_t i = 0; i < n_agents; ++i) {
    tr.observations.push_back(ObservationSet::unflatten(obs_at(t, i), layout));
    const auto m = avail_at(t, i);
    tr.available.emplace_back(m.begin(), m.end());
    tr.actions.push_back(action_at(t, i));
  }
  const auto s = state_at(t);
  tr.state.assign(s.begin(), s.end());
  tr.reward = rewards[t];
  tr.terminal = terminated && t + 1 == length;
  return tr;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Episode episode) {
  if (episodes_.size() == capacity_) episodes_.pop_front();
  episodes_.push_back(std::move(episode));
}

std::vector<const Episode*> ReplayBuffer::sample(std::size_t count, Rng& rng) const {
  std::vector<std::size_t> index(episodes_.size());
  for (std::size_t i = 0; i < index.size(); ++i) index[i] = i;
  const std::size_t take = std::min(count, index.size());
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < take; ++i) {
    std::swap(index[i], index[i + rng.uniform_int(index.size() - i)]);
  }
  std::vector<const Episode*> out;
  for (std::size_t i = 0; i < take; ++i) out.push_back(&episodes_[index[i]]);
  return out;
}

namespace {

void check_perm(std::span<const std::size_t> perm, std::size_t n, const char* what) {
  std::vector<bool> seen(n, false);
  bool ok = perm.size() == n;
  for (std::size_t i = 0; ok && i < perm.size(); ++i) {
    ok = perm[i] < n && !seen[perm[i]];
    if (ok) seen[perm[i]] = true;
  }
  if (!ok) {
    throw std::invalid_argument(std::string("permute_episode: ") + what +
                                " order is not a permutation of " + std::to_string(n) + " rows");
  }
}

}  // namespace

Episode permute_episode(const Episode& episode, std::span<const std::size_t> ally_perm,
                        std::span<const std::size_t> enemy_perm, std::size_t n_allies_in_state) {
  const ObsLayout& l = episode.layout;
  check_perm(ally_perm, l.ally_rows, "ally");
  check_perm(enemy_perm, l.enemy_rows, "enemy");
  if ((n_allies_in_state + l.enemy_rows) * 4 != episode.state_dim) {
    throw std::invalid_argument("permute_episode: state width " +
                                std::to_string(episode.state_dim) + " does not hold " +
                                std::to_string(n_allies_in_state) + " allies and " +
                                std::to_string(l.enemy_rows) + " enemies");
  }
  const std::size_t k = l.entity_dim;
  const std::size_t d = l.obs_dim();
  const std::size_t a = l.n_actions();
  const std::size_t views = episode.length + 1;
  if (episode.obs.size() != views * episode.n_agents * d ||
      episode.avail.size() != views * episode.n_agents * a ||
      episode.states.size() != views * episode.state_dim) {
    throw std::invalid_argument("permute_episode: inconsistent group sizes across the episode");
  }

  std::vector<std::size_t> enemy_inverse(enemy_perm.size());
  for (std::size_t j = 0; j < enemy_perm.size(); ++j) enemy_inverse[enemy_perm[j]] = j;

  Episode out = episode;
  for (std::size_t v = 0; v < views * episode.n_agents; ++v) {
    const double* src = episode.obs.data() + v * d;
    double* dst = out.obs.data() + v * d;
    for (std::size_t i = 0; i < l.ally_rows; ++i) {
      std::copy_n(src + l.ally_offset() + ally_perm[i] * k, k, dst + l.ally_offset() + i * k);
    }
    for (std::size_t j = 0; j < l.enemy_rows; ++j) {
      std::copy_n(src + l.enemy_offset() + enemy_perm[j] * k, k, dst + l.enemy_offset() + j * k);
    }
    const unsigned char* msrc = episode.avail.data() + v * a;
    unsigned char* mdst = out.avail.data() + v * a;
    for (std::size_t j = 0; j < l.enemy_rows; ++j) {
      mdst[l.move_actions + j] = msrc[l.move_actions + enemy_perm[j]];
    }
  }
  const std::size_t enemy_state = n_allies_in_state * 4;
  for (std::size_t t = 0; t < views; ++t) {
    const double* src = episode.states.data() + t * episode.state_dim + enemy_state;
    double* dst = out.states.data() + t * episode.state_dim + enemy_state;
    for (std::size_t j = 0; j < l.enemy_rows; ++j) std::copy_n(src + enemy_perm[j] * 4, 4, dst + j * 4);
  }
  const int base = static_cast<int>(l.move_actions);
  for (int& action : out.actions) {
    if (action >= base) action = base + static_cast<int>(enemy_inverse[action - base]);
  }
  return out;
}

EpisodeBatch augment_experience(const EpisodeBatch& batch, std::size_t num_permutations,
                                std::size_t n_allies_in_state, Rng& rng) {
  EpisodeBatch out = batch;
  for (std::size_t c = 0; c < num_permutations; ++c) {
    for (const Episode& e : batch) {
      const auto ally = rng.permutation(e.layout.ally_rows);
      const auto enemy = rng.permutation(e.layout.enemy_rows);
      out.push_back(permute_episode(e, ally, enemy, n_allies_in_state));
    }
  }
  return out;
}

}  // namespace permnet
