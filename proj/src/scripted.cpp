#include "permnet/scripted.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace permnet {

namespace {

struct Offset {
  int dx;
  int dy;
};

Offset cells(std::span<const double> row, const BattleConfig& c) {
  return {static_cast<int>(std::lround(row[0] * (c.width - 1))),
          static_cast<int>(std::lround(row[1] * (c.height - 1)))};
}

// Lowest health first, then lowest relative (y, x); rows never matter, so
// the choice survives any reordering of the enemy group.
int best_attack(const ObservationSet& obs, const ActionMask& mask) {
  const std::size_t move_actions = mask.size() - obs.enemies.rows;
  int best = -1;
  std::tuple<double, double, double> best_key;
  for (std::size_t j = 0; j < obs.enemies.rows; ++j) {
    if (!mask[move_actions + j]) continue;
    const auto row = obs.enemies.row(j);
    const std::tuple<double, double, double> key{row[2], row[1], row[0]};
    if (best < 0 || key < best_key) {
      best_key = key;
      best = static_cast<int>(move_actions + j);
    }
  }
  return best;
}

double outcome_score(const BattleEnv& env, const StepResult& last) {
  double score = last.won ? 1000.0 - env.battle().step : 0.0;
  for (const auto& a : env.battle().allies) score += a.health;
  for (const auto& e : env.battle().enemies) score -= e.health;
  return score;
}

}  // namespace

std::vector<int> focus_fire_policy(const std::vector<ObservationSet>& observations,
                                   const std::vector<ActionMask>& masks, const BattleConfig& config) {
  std::vector<int> actions(observations.size(), kStop);
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const ObservationSet& obs = observations[i];
    if (!masks[i][kStop]) {
      actions[i] = kNoop;
      continue;
    }
    const int attack = best_attack(obs, masks[i]);
    if (attack >= 0) {
      actions[i] = attack;
      continue;
    }

    int nearest = std::numeric_limits<int>::max();
    for (std::size_t j = 0; j < obs.enemies.rows; ++j) {
      if (obs.enemies.row(j)[3] == 0.0) continue;
      const Offset o = cells(obs.enemies.row(j), config);
      nearest = std::min(nearest, std::max(std::abs(o.dx), std::abs(o.dy)));
    }
    if (nearest <= 2) continue;

    // Line-up slot: rank of this agent among living teammates by (y, x).
    const int x = static_cast<int>(std::lround(obs.own[0] * (config.width - 1)));
    const int y = static_cast<int>(std::lround(obs.own[1] * (config.height - 1)));
    std::vector<int> ys{y};
    int rank = 0;
    for (std::size_t a = 0; a < obs.allies.rows; ++a) {
      if (obs.allies.row(a)[3] == 0.0) continue;
      const Offset o = cells(obs.allies.row(a), config);
      ys.push_back(y + o.dy);
      if (o.dy < 0 || (o.dy == 0 && o.dx < 0)) ++rank;
    }
    std::sort(ys.begin(), ys.end());
    const int team = static_cast<int>(ys.size());
    const int start = std::clamp(ys[ys.size() / 2] - team / 2, 0, config.height - team);
    const int target_y = start + rank;
    if (x > 0) {
      actions[i] = kWest;
    } else if (y < target_y) {
      actions[i] = kNorth;
    } else if (y > target_y) {
      actions[i] = kSouth;
    }
  }
  return actions;
}

std::vector<int> passive_policy(const std::vector<ObservationSet>& observations,
                                const std::vector<ActionMask>& masks) {
  std::vector<int> actions(observations.size(), kStop);
  for (std::size_t i = 0; i < observations.size(); ++i) {
    if (!masks[i][kStop]) actions[i] = kNoop;
  }
  return actions;
}

std::vector<int> lookahead_policy(const BattleEnv& env) {
  const auto masks = env.available_actions();
  const std::size_t n = masks.size();
  std::vector<std::vector<int>> options(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < masks[i].size(); ++a) {
      if (masks[i][a]) options[i].push_back(static_cast<int>(a));
    }
  }
  std::vector<std::size_t> cursor(n, 0);
  std::vector<int> best;
  double best_score = -std::numeric_limits<double>::infinity();
  while (true) {
    std::vector<int> joint(n);
    for (std::size_t i = 0; i < n; ++i) joint[i] = options[i][cursor[i]];
    BattleEnv sim = env;
    StepResult r = sim.step(joint);
    while (!r.done()) {
      r = sim.step(focus_fire_policy(sim.observations(), sim.available_actions(), sim.config()));
    }
    const double score = outcome_score(sim, r);
    if (score > best_score) {
      best_score = score;
      best = joint;
    }
    std::size_t k = 0;
    while (k < n && ++cursor[k] == options[k].size()) cursor[k++] = 0;
    if (k == n) break;
  }
  return best;
}

}  // namespace permnet
