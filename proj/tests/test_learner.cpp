#include <doctest.h>

#include <cmath>

#include "permnet/env.hpp"
#include "permnet/hpn.hpp"
#include "permnet/learner.hpp"
#include "permnet/replay.hpp"
#include "permnet/rollout.hpp"
#include "test_util.hpp"

using namespace permnet;
using namespace permnet::testing;

namespace {

// Forward-view lambda-return: a (1 - lambda)-weighted mixture of n-step
// returns, with the remaining weight on the longest one.
std::vector<double> forward_view(const std::vector<double>& r, const std::vector<double>& next_v,
                                 bool terminated, double gamma, double lambda) {
  const std::size_t n = r.size();
  auto value_after = [&](std::size_t t) {  // V_{t+1}
    return (t + 1 == n && terminated) ? 0.0 : next_v[t];
  };
  std::vector<double> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t horizon = n - t;
    double total = 0.0;
    double discounted = 0.0;
    for (std::size_t k = 1; k <= horizon; ++k) {
      discounted += std::pow(gamma, static_cast<double>(k - 1)) * r[t + k - 1];
      const double ret = discounted + std::pow(gamma, static_cast<double>(k)) * value_after(t + k - 1);
      const double weight = k < horizon ? (1.0 - lambda) * std::pow(lambda, static_cast<double>(k - 1))
                                        : std::pow(lambda, static_cast<double>(k - 1));
      total += weight * ret;
    }
    out[t] = total;
  }
  return out;
}

Episode play(std::uint64_t seed, std::size_t max_steps = 1000) {
  BattleEnv env(battle_preset("3v3"));
  env.reset(seed);
  Episode ep(env.layout(), env.n_agents(), env.config().state_dim());
  ep.push_view(env.observations(), env.state(), env.available_actions());
  Rng rng(seed);
  while (!env.finished() && ep.length < max_steps) {
    std::vector<int> actions;
    for (const auto& mask : env.available_actions()) {
      std::vector<std::size_t> ok;
      for (std::size_t a = 0; a < mask.size(); ++a) {
        if (mask[a]) ok.push_back(a);
      }
      actions.push_back(static_cast<int>(ok[rng.uniform_int(ok.size())]));
    }
    const StepResult res = env.step(actions);
    ep.push_step(actions, res.reward);
    ep.push_view(env.observations(), env.state(), env.available_actions());
    ep.terminated = res.terminated;
    ep.won = res.won;
  }
  return ep;
}

TrainConfig small_train() {
  TrainConfig t;
  t.batch_episodes = 4;
  t.seed = 3;
  return t;
}

NetworkConfig small_network() {
  NetworkConfig n;
  n.hpn = HpnConfig{16, 16, 2};
  return n;
}

}  // namespace

TEST_CASE("td lambda examples") {
  const auto g = td_lambda_targets(std::vector<double>{1, 1}, std::vector<double>{0, 0}, true, 0.9, 0.5);
  CHECK(g[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g[0] == doctest::Approx(1.45).epsilon(1e-15));
  CHECK_THROWS(td_lambda_targets(std::vector<double>{}, std::vector<double>{}, true, 0.9, 0.5));
}

TEST_CASE("td lambda degeneracies") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.uniform_int(10);
    std::vector<double> r(n);
    std::vector<double> v(n);
    for (double& x : r) x = rng.uniform(-1, 1);
    for (double& x : v) x = rng.uniform(-5, 5);
    const auto one_step = td_lambda_targets(r, v, true, 0.95, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      CHECK(one_step[t] == r[t] + 0.95 * (t + 1 == n ? 0.0 : v[t]));
    }
    const auto mc = td_lambda_targets(r, v, true, 0.95, 1.0);
    for (std::size_t t = 0; t < n; ++t) {
      double ret = 0.0;
      for (std::size_t k = n; k-- > t;) ret = r[k] + 0.95 * ret;
      CHECK(mc[t] == ret);
    }
  }
}

TEST_CASE("td lambda backward recursion matches the forward view") {
  Rng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.uniform_int(10);
    std::vector<double> r(n);
    std::vector<double> v(n);
    for (double& x : r) x = rng.uniform(-1, 1);
    for (double& x : v) x = rng.uniform(-5, 5);
    const bool terminated = rng.uniform() < 0.5;
    const double gamma = rng.uniform(0.5, 1.0);
    const double lambda = rng.uniform(0.0, 1.0);
    const auto got = td_lambda_targets(r, v, terminated, gamma, lambda);
    const auto want = forward_view(r, v, terminated, gamma, lambda);
    CHECK(max_abs_diff(got, want) <= 1e-10);
  }
}

TEST_CASE("epsilon schedule and selection") {
  CHECK(EpsilonSchedule{1.0, 0.05, 100000}.value(50000) == doctest::Approx(0.525).epsilon(1e-15));
  CHECK(EpsilonSchedule{1.0, 0.05, 100000}.value(0) == 1.0);
  CHECK(EpsilonSchedule{1.0, 0.05, 100000}.value(250000) == 0.05);

  Rng rng(3);
  const std::vector<double> q{5.0, 1.0, 9.0, 2.0, 7.0};
  const std::vector<unsigned char> mask{1, 1, 0, 1, 1};
  for (int i = 0; i < 100; ++i) CHECK(epsilon_greedy_select(q, mask, 0.0, rng) == 4);

  std::vector<int> counts(5, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[epsilon_greedy_select(q, mask, 1.0, rng)];
  CHECK(counts[2] == 0);
  for (int a : {0, 1, 3, 4}) CHECK(std::abs(counts[a] / static_cast<double>(n) - 0.25) <= 0.01);

  CHECK_THROWS(epsilon_greedy_select(q, std::vector<unsigned char>(5, 0), 0.5, rng));
}

TEST_CASE("replay buffer evicts oldest and samples without replacement") {
  ReplayBuffer buffer(3);
  for (std::uint64_t s = 0; s < 5; ++s) {
    Episode ep = play(s, 2);
    ep.rewards[0] = static_cast<double>(s);
    buffer.push(ep);
  }
  CHECK(buffer.size() == 3);
  CHECK(buffer.at(0).rewards[0] == 2.0);
  Rng rng(4);
  const auto picked = buffer.sample(3, rng);
  CHECK(picked.size() == 3);
  CHECK(picked[0] != picked[1]);
  CHECK(picked[1] != picked[2]);
  CHECK(picked[0] != picked[2]);
  CHECK(buffer.sample(10, rng).size() == 3);
}

TEST_CASE("augmentation") {
  const BattleConfig battle = battle_preset("3v3");
  const Episode ep = play(7);
  const std::size_t allies_in_state = battle.n_allies;

  SUBCASE("identity permutations leave the episode unchanged") {
    CHECK(permute_episode(ep, std::vector<std::size_t>{0, 1}, std::vector<std::size_t>{0, 1, 2},
                          allies_in_state) == ep);
  }
  SUBCASE("an enemy swap relabels attack actions") {
    Episode one = play(7, 1);
    one.actions[0] = kAttackBase + 0;
    const Episode swapped = permute_episode(one, std::vector<std::size_t>{0, 1},
                                            std::vector<std::size_t>{1, 0, 2}, allies_in_state);
    CHECK(swapped.actions[0] == kAttackBase + 1);
    CHECK(swapped.actions[1] == one.actions[1]);
  }
  SUBCASE("batch is followed by relabelled copies") {
    Rng rng(5);
    const EpisodeBatch batch{ep, play(8)};
    const EpisodeBatch out = augment_experience(batch, 2, allies_in_state, rng);
    REQUIRE(out.size() == 6);
    CHECK(out[0] == batch[0]);
    CHECK(out[1] == batch[1]);
    CHECK(out[2].length == batch[0].length);
    CHECK(out[3].rewards == batch[1].rewards);
  }
  SUBCASE("hpn on an augmented transition") {
    Rng rng(6);
    const ObsLayout layout = battle.layout();
    for (int trial = 0; trial < 10; ++trial) {
      const HpnAgentNetwork net(layout, HpnConfig{}, rng);
      const auto ap = rng.permutation(layout.ally_rows);
      const auto epm = rng.permutation(layout.enemy_rows);
      const Episode aug = permute_episode(ep, ap, epm, allies_in_state);
      const std::size_t t = rng.uniform_int(ep.length);
      for (std::size_t agent = 0; agent < ep.n_agents; ++agent) {
        const auto o = ep.obs_at(t, agent);
        const auto oa = aug.obs_at(t, agent);
        const Tensor q = net.forward(Tensor({1, layout.obs_dim()}, {o.begin(), o.end()}));
        const Tensor qa = net.forward(Tensor({1, layout.obs_dim()}, {oa.begin(), oa.end()}));
        for (std::size_t j = 0; j < layout.enemy_rows; ++j) {
          CHECK(qa.data()[layout.move_actions + j] == q.data()[layout.move_actions + epm[j]]);
        }
        CHECK(qa.data()[static_cast<std::size_t>(aug.action_at(t, agent))] ==
              q.data()[static_cast<std::size_t>(ep.action_at(t, agent))]);
      }
    }
  }
}

TEST_CASE("training on one fixed transition drives the loss down") {
  Episode one = play(11, 1);
  one.terminated = true;
  Learner learner(Architecture::kHpn, MixerKind::kVdn, battle_preset("3v3"), small_train(),
                  small_network());
  const Episode* batch[] = {&one};
  double loss = 0.0;
  int steps = 0;
  for (; steps < 2000; ++steps) {
    loss = learner.train_step(batch);
    if (loss < 1e-3) break;
  }
  MESSAGE("single-transition loss " << loss << " after " << steps << " steps");
  CHECK(loss < 1e-3);
}

TEST_CASE("training is deterministic and finite") {
  const Episode a = play(21);
  const Episode b = play(22);
  const Episode* batch[] = {&a, &b};
  for (Architecture arch : {Architecture::kHpn, Architecture::kDpn}) {
    for (MixerKind mixer : {MixerKind::kVdn, MixerKind::kQmix}) {
      CAPTURE(architecture_name(arch));
      TrainConfig cfg = small_train();
      cfg.augment = true;
      Learner l1(arch, mixer, battle_preset("3v3"), cfg, small_network());
      Learner l2(arch, mixer, battle_preset("3v3"), cfg, small_network());
      for (int i = 0; i < 20; ++i) {
        const double x = l1.train_step(batch);
        const double y = l2.train_step(batch);
        REQUIRE(std::isfinite(x));
        CAPTURE(i);
        REQUIRE(x == y);
      }
    }
  }
}

TEST_CASE("target network is hard-copied on schedule") {
  TrainConfig cfg = small_train();
  cfg.target_update_interval = 3;
  Learner learner(Architecture::kConcat, MixerKind::kVdn, battle_preset("3v3"), cfg, small_network());
  const Episode a = play(31);
  const Episode* batch[] = {&a};
  auto same = [&] {
    const auto online = learner.agent().parameters();
    const auto target = learner.target_agent().parameters();
    for (std::size_t i = 0; i < online.size(); ++i) {
      if (!std::equal(online[i].tensor.data().begin(), online[i].tensor.data().end(),
                      target[i].tensor.data().begin())) {
        return false;
      }
    }
    return true;
  };
  CHECK(same());
  learner.train_step(batch);
  CHECK_FALSE(same());
  learner.train_step(batch);
  learner.train_step(batch);
  CHECK(same());
}
