#pragma once

#include <vector>

#include "permnet/env.hpp"

namespace permnet {

// Hand-written ally policies. The observation-based ones behave identically
// under ShuffleWrapper.

// Each agent attacks the attackable enemy with the lowest health (lowest
// relative (y, x) on ties). Otherwise the team forms a vertical line on column 0 and holds
// once any enemy is within two cells, so approaching enemies walk into range
// and get hit first.
std::vector<int> focus_fire_policy(const std::vector<ObservationSet>& observations,
                                   const std::vector<ActionMask>& masks, const BattleConfig& config);

// Never attacks.
std::vector<int> passive_policy(const std::vector<ObservationSet>& observations,
                                const std::vector<ActionMask>& masks);

// One-step lookahead on the canonical environment: every available joint
// action is simulated to the end of the episode with focus_fire_policy as the
// continuation, and the joint action with the best outcome (win, then
// fewest steps, then health margin) is taken.
std::vector<int> lookahead_policy(const BattleEnv& env);

}  // namespace permnet
