#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <vector>

#include "permnet/agent_network.hpp"
#include "permnet/env.hpp"
#include "permnet/replay.hpp"

namespace permnet {

// Joint action for the environment's current state.
using JointPolicy = std::function<std::vector<int>(const Environment&)>;

// Greedy actions of a network, with unavailable actions excluded.
std::vector<int> greedy_actions(const AgentNetwork& agent, const Environment& env,
                                ForwardContext ctx = {});

// Greedy, noise-free policy of a network.
JointPolicy greedy_policy(const AgentNetwork& agent);

// Plays one episode from reset(reset_seed) with epsilon-greedy exploration.
// `rng` drives exploration and, unless `deterministic`, DPN noise.
Episode collect_episode(Environment& env, std::uint64_t reset_seed, const AgentNetwork& agent,
                        double epsilon, bool deterministic, Rng& rng);

// Fraction of `episodes` won; episode i starts from reset(Rng::derive(seed, i)).
double evaluate(const JointPolicy& policy, Environment& env, std::size_t episodes,
                std::uint64_t seed);

inline constexpr const char* kTrajectoryHeader = "step\tagent_id\taction\treward\tterminal";

// Plays one episode and writes one tab-separated line per step and agent
// under kTrajectoryHeader. Returns whether the episode was won.
bool write_trajectory(std::ostream& out, const JointPolicy& policy, Environment& env,
                      std::uint64_t reset_seed);

}  // namespace permnet
