#include "permnet/learner.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "permnet/ops.hpp"

namespace permnet {

void TrainConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in (0, 1]");
  if (!(td_lambda >= 0.0 && td_lambda <= 1.0)) {
    throw std::invalid_argument("td_lambda must be in [0, 1]");
  }
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (buffer_size == 0 || batch_episodes == 0 || parallel_runners == 0 ||
      target_update_interval == 0) {
    throw std::invalid_argument(
        "buffer_size, batch_episodes, parallel_runners and target_update_interval must be positive");
  }
}

std::vector<double> td_lambda_targets(std::span<const double> rewards,
                                      std::span<const double> next_values, bool terminated,
                                      double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (n == 0) throw std::invalid_argument("td_lambda_targets: empty episode");
  if (next_values.size() != n) {
    throw std::invalid_argument("td_lambda_targets: " + std::to_string(next_values.size()) +
                                " bootstrap values for " + std::to_string(n) + " rewards");
  }
  std::vector<double> g(n);
  double next_return = terminated ? 0.0 : next_values[n - 1];
  for (std::size_t i = n; i-- > 0;) {
    double v = next_values[i];
    if (i + 1 == n && terminated) v = 0.0;
    g[i] = rewards[i] + gamma * ((1.0 - lambda) * v + lambda * next_return);
    next_return = g[i];
  }
  return g;
}

double EpsilonSchedule::value(std::size_t env_steps) const {
  if (anneal_steps == 0 || env_steps >= anneal_steps) return finish;
  const double frac = static_cast<double>(env_steps) / static_cast<double>(anneal_steps);
  return start + (finish - start) * frac;
}

int epsilon_greedy_select(std::span<const double> q, std::span<const unsigned char> available,
                          double epsilon, Rng& rng) {
  if (q.size() != available.size()) {
    throw std::invalid_argument("epsilon_greedy_select: " + std::to_string(q.size()) +
                                " values for a mask of " + std::to_string(available.size()));
  }
  std::size_t count = 0;
  for (unsigned char a : available) count += a ? 1 : 0;
  if (count == 0) throw std::invalid_argument("epsilon_greedy_select: no available action");

  if (rng.uniform() < epsilon) {
    std::size_t pick = rng.uniform_int(count);
    for (std::size_t i = 0; i < available.size(); ++i) {
      if (available[i] && pick-- == 0) return static_cast<int>(i);
    }
  }
  int best = -1;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (available[i] && (best < 0 || q[i] > q[static_cast<std::size_t>(best)])) {
      best = static_cast<int>(i);
    }
  }
  return best;
}

Learner::Learner(Architecture arch, MixerKind mixer, const BattleConfig& battle,
                 const TrainConfig& train, const NetworkConfig& network)
    : train_(train),
      n_agents_(battle.n_allies),
      n_allies_state_(battle.n_allies),
      noise_rng_(Rng::derive(train.seed, 0x5EED0001)),
      augment_rng_(Rng::derive(train.seed, 0x5EED0002)) {
  train_.validate();
  Rng init(Rng::derive(train.seed, 0x5EED0000));
  const ObsLayout layout = battle.layout();
  agent_ = make_agent_network(arch, layout, network, init);
  target_agent_ = make_agent_network(arch, layout, network, init);
  const QmixConfig qmix{train.mixing_embed_dim, train.hypernet_embed};
  mixer_ = make_mixer(mixer, n_agents_, battle.state_dim(), qmix, init);
  target_mixer_ = make_mixer(mixer, n_agents_, battle.state_dim(), qmix, init);
  update_targets();
  params_ = parameters();
  AdamConfig adam;
  adam.lr = train.lr;
  adam_ = AdamState::for_parameters(params_, adam);
}

std::vector<NamedParameter> Learner::parameters() const {
  std::vector<NamedParameter> out;
  agent_->collect_parameters("agent.", out);
  mixer_->collect_parameters("mixer.", out);
  return out;
}

void Learner::update_targets() {
  copy_parameters(*agent_, *target_agent_);
  copy_parameters(*mixer_, *target_mixer_);
}

double Learner::train_step(std::span<const Episode* const> batch_in) {
  if (batch_in.empty()) throw std::invalid_argument("train_step: empty batch");
  EpisodeBatch augmented;
  std::vector<const Episode*> batch(batch_in.begin(), batch_in.end());
  if (train_.augment && train_.num_permutations > 0) {
    EpisodeBatch copies;
    for (const Episode* e : batch_in) copies.push_back(*e);
    augmented = augment_experience(copies, train_.num_permutations, n_allies_state_, augment_rng_);
    batch.clear();
    for (const Episode& e : augmented) batch.push_back(&e);
  }

  const ObsLayout& layout = agent_->layout();
  const std::size_t d = layout.obs_dim();
  const std::size_t n_act = layout.n_actions();
  const std::size_t n = n_agents_;
  const std::size_t state_dim = batch.front()->state_dim;

  // All views of all episodes, episode-major.
  std::vector<double> obs;
  std::vector<std::size_t> view_start;
  std::size_t views = 0;
  std::size_t steps = 0;
  for (const Episode* e : batch) {
    if (e->length == 0) throw std::invalid_argument("train_step: empty episode");
    view_start.push_back(views);
    obs.insert(obs.end(), e->obs.begin(), e->obs.end());
    views += e->length + 1;
    steps += e->length;
  }

  std::vector<std::size_t> cur_rows, next_rows, cur_actions;
  std::vector<double> cur_states, next_states;
  cur_rows.reserve(steps * n);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Episode& e = *batch[b];
    for (std::size_t t = 0; t < e.length; ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        cur_rows.push_back((view_start[b] + t) * n + i);
        next_rows.push_back((view_start[b] + t + 1) * n + i);
        cur_actions.push_back(static_cast<std::size_t>(e.action_at(t, i)));
      }
      const auto s0 = e.state_at(t);
      const auto s1 = e.state_at(t + 1);
      cur_states.insert(cur_states.end(), s0.begin(), s0.end());
      next_states.insert(next_states.end(), s1.begin(), s1.end());
    }
  }

  const Tensor obs_t({views * n, d}, std::move(obs));
  ForwardContext noisy{false, &noise_rng_};
  const Tensor q_all = agent_->forward(obs_t, noisy);

  std::vector<double> targets;
  {
    NoGradGuard no_grad;
    const Tensor target_q = target_agent_->forward(obs_t, noisy);
    // Double Q: the online network picks the next action, the target
    // network scores it.
    const auto online = q_all.data();
    const auto tq = target_q.data();
    std::vector<double> next_q(steps * n);
    std::size_t r = 0;
    for (const Episode* e : batch) {
      for (std::size_t t = 0; t < e->length; ++t) {
        for (std::size_t i = 0; i < n; ++i, ++r) {
          const std::size_t row = next_rows[r];
          const auto mask = e->avail_at(t + 1, i);
          std::size_t best = n_act;
          for (std::size_t a = 0; a < n_act; ++a) {
            if (mask[a] && (best == n_act || online[row * n_act + a] > online[row * n_act + best])) {
              best = a;
            }
          }
          // A view after the final step may have nothing available; its
          // value is never bootstrapped from in that case.
          next_q[r] = best == n_act ? 0.0 : tq[row * n_act + best];
        }
      }
    }
    const Tensor v_next = target_mixer_->forward(Tensor({steps, n}, std::move(next_q)),
                                                 Tensor({steps, state_dim}, next_states));
    const auto vn = v_next.data();
    std::size_t offset = 0;
    for (const Episode* e : batch) {
      const auto g = td_lambda_targets(e->rewards, vn.subspan(offset, e->length), e->terminated,
                                       train_.gamma, train_.td_lambda);
      targets.insert(targets.end(), g.begin(), g.end());
      offset += e->length;
    }
  }

  const Tensor chosen = reshape(gather_last(take_rows(q_all, cur_rows), cur_actions), {steps, n});
  const Tensor q_tot = mixer_->forward(chosen, Tensor({steps, state_dim}, std::move(cur_states)));
  const Tensor loss = mean_all(square(sub(q_tot, Tensor({steps}, std::move(targets)))));
  const double value = loss.item();
  if (!std::isfinite(value)) {
    throw NumericError("train_step: non-finite loss " + std::to_string(value) + " at step " +
                       std::to_string(train_steps_));
  }

  zero_grad(params_);
  loss.backward();
  if (train_.grad_clip > 0.0) clip_grad_norm(params_, train_.grad_clip);
  adam_step(params_, adam_);
  ++train_steps_;
  if (train_steps_ % train_.target_update_interval == 0) update_targets();
  return value;
}

}  // namespace permnet
