#include "permnet/rollout.hpp"

#include <cstdio>

#include "permnet/learner.hpp"
#include "permnet/ops.hpp"

namespace permnet {

namespace {

Tensor agent_q(const AgentNetwork& agent, const Environment& env, ForwardContext ctx) {
  NoGradGuard no_grad;
  const auto observations = env.observations();
  return agent.forward(stack_observations(observations, env.layout()), ctx);
}

}  // namespace

std::vector<int> greedy_actions(const AgentNetwork& agent, const Environment& env,
                                ForwardContext ctx) {
  const Tensor q = agent_q(agent, env, ctx);
  const auto masks = env.available_actions();
  const std::size_t a = env.n_actions();
  Rng unused(0);
  std::vector<int> actions;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    actions.push_back(epsilon_greedy_select(q.data().subspan(i * a, a), masks[i], 0.0, unused));
  }
  return actions;
}

JointPolicy greedy_policy(const AgentNetwork& agent) {
  return [&agent](const Environment& env) { return greedy_actions(agent, env); };
}

Episode collect_episode(Environment& env, std::uint64_t reset_seed, const AgentNetwork& agent,
                        double epsilon, bool deterministic, Rng& rng) {
  env.reset(reset_seed);
  Episode episode(env.layout(), env.n_agents(), env.config().state_dim());
  const std::size_t a = env.n_actions();
  ForwardContext ctx{deterministic, &rng};
  while (true) {
    const auto observations = env.observations();
    const auto masks = env.available_actions();
    episode.push_view(observations, env.state(), masks);
    if (env.finished()) break;
    Tensor q;
    {
      NoGradGuard no_grad;
      q = agent.forward(stack_observations(observations, env.layout()), ctx);
    }
    std::vector<int> actions;
    for (std::size_t i = 0; i < masks.size(); ++i) {
      actions.push_back(epsilon_greedy_select(q.data().subspan(i * a, a), masks[i], epsilon, rng));
    }
    const StepResult result = env.step(actions);
    episode.push_step(actions, result.reward);
    if (result.done()) {
      episode.terminated = result.terminated;
      episode.won = result.won;
    }
  }
  return episode;
}

double evaluate(const JointPolicy& policy, Environment& env, std::size_t episodes,
                std::uint64_t seed) {
  if (episodes == 0) return 0.0;
  std::size_t wins = 0;
  for (std::size_t i = 0; i < episodes; ++i) {
    env.reset(Rng::derive(seed, i));
    while (!env.finished()) env.step(policy(env));
    if (env.won()) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(episodes);
}

bool write_trajectory(std::ostream& out, const JointPolicy& policy, Environment& env,
                      std::uint64_t reset_seed) {
  env.reset(reset_seed);
  out << kTrajectoryHeader << '\n';
  char reward[64];
  while (!env.finished()) {
    const int step = env.battle().step;
    const auto actions = policy(env);
    const StepResult r = env.step(actions);
    std::snprintf(reward, sizeof reward, "%.6f", r.reward);
    for (std::size_t i = 0; i < actions.size(); ++i) {
      out << step << '\t' << i << '\t' << actions[i] << '\t' << reward << '\t'
          << (r.done() ? 1 : 0) << '\n';
    }
  }
  return env.won();
}

}  // namespace permnet
