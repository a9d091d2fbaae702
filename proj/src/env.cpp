#include "permnet/env.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <stdexcept>

namespace permnet {

namespace {

std::vector<std::size_t> identity_order(std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  return order;
}

Position moved(Position p, int action) {
  switch (action) {
    case kNorth: return {p.x, p.y + 1};
    case kSouth: return {p.x, p.y - 1};
    case kEast: return {p.x + 1, p.y};
    case kWest: return {p.x - 1, p.y};
    default: return p;
  }
}

int region_columns(const BattleConfig&) { return 1; }

void append_entity(std::vector<double>& out, const EntityState& e, const BattleConfig& c) {
  if (!e.alive) {
    out.insert(out.end(), {0.0, 0.0, 0.0, 0.0});
    return;
  }
  out.push_back(static_cast<double>(e.pos.x) / (c.width - 1));
  out.push_back(static_cast<double>(e.pos.y) / (c.height - 1));
  out.push_back(static_cast<double>(e.health) / c.max_health);
  out.push_back(1.0);
}

std::vector<double> state_in_order(const BattleState& s, const BattleConfig& c,
                                   std::span<const std::size_t> ally_order,
                                   std::span<const std::size_t> enemy_order) {
  std::vector<double> out;
  out.reserve(c.state_dim());
  for (std::size_t a : ally_order) append_entity(out, s.allies[a], c);
  for (std::size_t e : enemy_order) append_entity(out, s.enemies[e], c);
  return out;
}

}  // namespace

int chebyshev(Position a, Position b) { return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)); }
int manhattan(Position a, Position b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

void BattleConfig::validate() const {
  if (width < 2 || height < 2) throw std::invalid_argument("battle: grid must be at least 2x2");
  if (n_allies < 1 || n_enemies < 1) throw std::invalid_argument("battle: need at least one unit per team");
  if (max_health <= 0 || attack_range <= 0 || attack_damage <= 0) {
    throw std::invalid_argument("battle: health, range and damage must be positive");
  }
  if (episode_limit < 1) throw std::invalid_argument("battle: episode_limit must be >= 1");
  if (!(damage_scale > 0.0) || !(kill_bonus > 0.0) || !(win_bonus > 0.0)) {
    throw std::invalid_argument("battle: reward weights must be positive");
  }
  const std::size_t cells = static_cast<std::size_t>(region_columns(*this) * height);
  if (n_allies > cells || n_enemies > cells) {
    throw std::invalid_argument("battle: more entities than grid cells in the spawn region (" +
                                std::to_string(cells) + ")");
  }
}

ObsLayout BattleConfig::layout() const {
  ObsLayout l;
  l.own_dim = 3;
  l.entity_dim = 4;
  l.ally_rows = n_allies - 1;
  l.enemy_rows = n_enemies;
  l.move_actions = kMoveActions;
  l.alive_column = 3;
  return l;
}

BattleConfig battle_preset(std::string_view name) {
  BattleConfig c;
  if (name == "3v3") return c;
  if (name == "2v3") {
    c.n_allies = 2;
    return c;
  }
  if (name == "5v6") {
    c.width = c.height = 10;
    c.n_allies = 5;
    c.n_enemies = 6;
    c.episode_limit = 80;
    return c;
  }
  if (name == "8v9") {
    c.width = c.height = 12;
    c.n_allies = 8;
    c.n_enemies = 9;
    c.episode_limit = 100;
    return c;
  }
  throw std::invalid_argument("unknown preset '" + std::string(name) + "'");
}

std::vector<std::string> battle_preset_names() { return {"3v3", "2v3", "5v6", "8v9"}; }

bool Environment::won() const {
  const auto& e = battle().enemies;
  return std::none_of(e.begin(), e.end(), [](const EntityState& s) { return s.alive; });
}

bool Environment::finished() const {
  const auto& a = battle().allies;
  const bool allies_dead = std::none_of(a.begin(), a.end(), [](const EntityState& s) { return s.alive; });
  return won() || allies_dead || battle().step >= config().episode_limit;
}

BattleEnv::BattleEnv(BattleConfig config) : config_(config) {
  config_.validate();
  reset(0);
}

void BattleEnv::reset(std::uint64_t seed) {
  Rng rng(Rng::derive(seed, 0xB417));
  const int cols = region_columns(config_);
  auto place = [&](int x0, std::size_t count, Team team) {
    const std::size_t cells = static_cast<std::size_t>(cols * config_.height);
    const auto perm = rng.permutation(cells);
    std::vector<EntityState> units;
    for (std::size_t i = 0; i < count; ++i) {
      const int c = static_cast<int>(perm[i]);
      units.push_back({{x0 + c / config_.height, c % config_.height}, config_.max_health, true, team});
    }
    return units;
  };
  state_.allies = place(0, config_.n_allies, Team::kAlly);
  state_.enemies = place(config_.width - cols, config_.n_enemies, Team::kEnemy);
  state_.step = 0;
}

void BattleEnv::set_state(BattleState state) {
  if (state.allies.size() != config_.n_allies || state.enemies.size() != config_.n_enemies) {
    throw std::invalid_argument("set_state: unit counts do not match the config");
  }
  state_ = std::move(state);
}

bool BattleEnv::in_bounds(Position p) const {
  return p.x >= 0 && p.y >= 0 && p.x < config_.width && p.y < config_.height;
}

bool BattleEnv::occupied(Position p) const {
  auto at = [p](const EntityState& e) { return e.alive && e.pos == p; };
  return std::any_of(state_.allies.begin(), state_.allies.end(), at) ||
         std::any_of(state_.enemies.begin(), state_.enemies.end(), at);
}

ObservationSet BattleEnv::observe(std::size_t agent, std::span<const std::size_t> ally_order,
                                  std::span<const std::size_t> enemy_order) const {
  const ObsLayout l = config_.layout();
  ObservationSet obs;
  obs.own.assign(l.own_dim, 0.0);
  obs.allies = {l.ally_rows, l.entity_dim, std::vector<double>(l.ally_rows * l.entity_dim, 0.0)};
  obs.enemies = {l.enemy_rows, l.entity_dim, std::vector<double>(l.enemy_rows * l.entity_dim, 0.0)};
  const EntityState& self = state_.allies.at(agent);
  if (!self.alive) return obs;

  const double sx = config_.width - 1;
  const double sy = config_.height - 1;
  obs.own = {self.pos.x / sx, self.pos.y / sy,
             static_cast<double>(self.health) / config_.max_health};
  auto fill = [&](std::span<double> row, const EntityState& e) {
    if (!e.alive) return;
    row[0] = (e.pos.x - self.pos.x) / sx;
    row[1] = (e.pos.y - self.pos.y) / sy;
    row[2] = static_cast<double>(e.health) / config_.max_health;
    row[3] = 1.0;
  };
  std::size_t r = 0;
  for (std::size_t a : ally_order) {
    if (a == agent) continue;
    fill(obs.allies.row(r++), state_.allies.at(a));
  }
  for (std::size_t j = 0; j < enemy_order.size(); ++j) {
    fill(obs.enemies.row(j), state_.enemies.at(enemy_order[j]));
  }
  return obs;
}

ActionMask BattleEnv::available(std::size_t agent) const {
  ActionMask mask(config_.layout().n_actions(), 0);
  const EntityState& self = state_.allies.at(agent);
  if (!self.alive) {
    mask[kNoop] = 1;
    return mask;
  }
  mask[kStop] = 1;
  for (int a : {kNorth, kSouth, kEast, kWest}) mask[a] = in_bounds(moved(self.pos, a)) ? 1 : 0;
  for (std::size_t e = 0; e < state_.enemies.size(); ++e) {
    const EntityState& enemy = state_.enemies[e];
    mask[kAttackBase + e] = enemy.alive && chebyshev(self.pos, enemy.pos) <= config_.attack_range;
  }
  return mask;
}

std::vector<ObservationSet> BattleEnv::observations() const {
  const auto allies = identity_order(config_.n_allies);
  const auto enemies = identity_order(config_.n_enemies);
  std::vector<ObservationSet> out;
  out.reserve(config_.n_allies);
  for (std::size_t i = 0; i < config_.n_allies; ++i) out.push_back(observe(i, allies, enemies));
  return out;
}

std::vector<ActionMask> BattleEnv::available_actions() const {
  std::vector<ActionMask> out;
  for (std::size_t i = 0; i < config_.n_allies; ++i) out.push_back(available(i));
  return out;
}

std::vector<double> BattleEnv::state() const {
  return state_in_order(state_, config_, identity_order(config_.n_allies),
                        identity_order(config_.n_enemies));
}

StepResult BattleEnv::step(const std::vector<int>& actions) {
  if (actions.size() != config_.n_allies) {
    throw ContractViolation("step: expected " + std::to_string(config_.n_allies) + " actions, got " +
                            std::to_string(actions.size()));
  }
  if (finished()) throw ContractViolation("step: episode already finished");
  const std::size_t n_actions = config_.layout().n_actions();
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const int a = actions[i];
    if (a < 0 || static_cast<std::size_t>(a) >= n_actions || !available(i)[static_cast<std::size_t>(a)]) {
      throw ContractViolation("step: action " + std::to_string(a) + " unavailable for agent " +
                              std::to_string(i));
    }
  }

  StepResult result;
  // Ally moves, in agent order.
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const int a = actions[i];
    if (a < kNorth || a > kWest) continue;
    const Position target = moved(state_.allies[i].pos, a);
    if (in_bounds(target) && !occupied(target)) state_.allies[i].pos = target;
  }
  // Simultaneous ally attacks.
  std::vector<int> damage(config_.n_enemies, 0);
  for (int a : actions) {
    if (a >= kAttackBase) damage[static_cast<std::size_t>(a - kAttackBase)] += config_.attack_damage;
  }
  int dealt = 0;
  for (std::size_t e = 0; e < config_.n_enemies; ++e) {
    EntityState& enemy = state_.enemies[e];
    if (!enemy.alive || damage[e] == 0) continue;
    const int hit = std::min(enemy.health, damage[e]);
    enemy.health -= hit;
    dealt += hit;
    if (enemy.health == 0) {
      enemy.alive = false;
      ++result.kills;
    }
  }

  result.won = won();
  if (!result.won) {
    const std::vector<int> enemy_actions = scripted_enemy_policy(state_, config_);
    std::vector<int> incoming(config_.n_allies, 0);
    for (std::size_t e = 0; e < config_.n_enemies; ++e) {
      const int a = enemy_actions[e];
      if (a >= kAttackBase) {
        incoming[static_cast<std::size_t>(a - kAttackBase)] += config_.attack_damage;
      } else if (a >= kNorth && a <= kWest) {
        const Position target = moved(state_.enemies[e].pos, a);
        if (in_bounds(target) && !occupied(target)) state_.enemies[e].pos = target;
      }
    }
    for (std::size_t i = 0; i < config_.n_allies; ++i) {
      EntityState& ally = state_.allies[i];
      if (!ally.alive || incoming[i] == 0) continue;
      ally.health -= std::min(ally.health, incoming[i]);
      if (ally.health == 0) ally.alive = false;
    }
  }

  ++state_.step;
  const bool allies_dead = std::none_of(state_.allies.begin(), state_.allies.end(),
                                        [](const EntityState& s) { return s.alive; });
  result.terminated = result.won || allies_dead;
  result.truncated = !result.terminated && state_.step >= config_.episode_limit;
  result.damage_dealt = dealt;
  result.reward = config_.damage_scale * dealt + config_.kill_bonus * result.kills +
                  (result.won ? config_.win_bonus : 0.0);
  return result;
}

std::vector<int> scripted_enemy_policy(const BattleState& state, const BattleConfig& config) {
  std::vector<int> actions(state.enemies.size(), kNoop);
  auto occupied = [&](Position p) {
    auto at = [p](const EntityState& e) { return e.alive && e.pos == p; };
    return std::any_of(state.allies.begin(), state.allies.end(), at) ||
           std::any_of(state.enemies.begin(), state.enemies.end(), at);
  };
  for (std::size_t e = 0; e < state.enemies.size(); ++e) {
    const EntityState& self = state.enemies[e];
    if (!self.alive) continue;
    std::size_t nearest = state.allies.size();
    for (std::size_t a = 0; a < state.allies.size(); ++a) {
      const EntityState& ally = state.allies[a];
      if (!ally.alive) continue;
      if (chebyshev(self.pos, ally.pos) <= config.attack_range) {
        actions[e] = kAttackBase + static_cast<int>(a);
        break;
      }
      if (nearest == state.allies.size() ||
          chebyshev(self.pos, ally.pos) < chebyshev(self.pos, state.allies[nearest].pos)) {
        nearest = a;
      }
    }
    if (actions[e] != kNoop) continue;
    actions[e] = kStop;
    if (nearest == state.allies.size()) continue;
    const Position goal = state.allies[nearest].pos;
    for (int a : {kWest, kEast, kSouth, kNorth}) {
      const Position p = moved(self.pos, a);
      if (p.x < 0 || p.y < 0 || p.x >= config.width || p.y >= config.height || occupied(p)) continue;
      if (manhattan(p, goal) < manhattan(self.pos, goal) &&
          chebyshev(p, goal) <= chebyshev(self.pos, goal)) {
        actions[e] = a;
        break;
      }
    }
  }
  return actions;
}

ShuffleWrapper::ShuffleWrapper(BattleConfig config, std::uint64_t shuffle_seed)
    : inner_(config), rng_(shuffle_seed) {
  ally_perm_ = identity_order(config.n_allies);
  enemy_perm_ = identity_order(config.n_enemies);
}

void ShuffleWrapper::reset(std::uint64_t seed) {
  inner_.reset(seed);
  ally_perm_ = rng_.permutation(inner_.config().n_allies);
  enemy_perm_ = rng_.permutation(inner_.config().n_enemies);
}

void ShuffleWrapper::set_permutations(std::vector<std::size_t> ally, std::vector<std::size_t> enemy) {
  if (ally.size() != inner_.config().n_allies || enemy.size() != inner_.config().n_enemies) {
    throw std::invalid_argument("set_permutations: sizes do not match the config");
  }
  ally_perm_ = std::move(ally);
  enemy_perm_ = std::move(enemy);
}

int ShuffleWrapper::to_canonical(int action) const {
  if (action < kAttackBase) return action;
  return kAttackBase + static_cast<int>(enemy_perm_.at(static_cast<std::size_t>(action - kAttackBase)));
}

StepResult ShuffleWrapper::step(const std::vector<int>& actions) {
  std::vector<int> canonical(actions.size());
  const int n_actions = static_cast<int>(inner_.n_actions());
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (actions[i] < 0 || actions[i] >= n_actions) {
      throw ContractViolation("step: action " + std::to_string(actions[i]) + " out of range");
    }
    canonical[i] = to_canonical(actions[i]);
  }
  return inner_.step(canonical);
}

std::vector<ObservationSet> ShuffleWrapper::observations() const {
  std::vector<ObservationSet> out;
  for (std::size_t i = 0; i < inner_.config().n_allies; ++i) {
    out.push_back(inner_.observe(i, ally_perm_, enemy_perm_));
  }
  return out;
}

std::vector<ActionMask> ShuffleWrapper::available_actions() const {
  std::vector<ActionMask> out;
  for (std::size_t i = 0; i < inner_.config().n_allies; ++i) {
    const ActionMask canonical = inner_.available(i);
    ActionMask mask(canonical.size());
    for (std::size_t a = 0; a < kMoveActions; ++a) mask[a] = canonical[a];
    for (std::size_t j = 0; j < enemy_perm_.size(); ++j) {
      mask[kAttackBase + j] = canonical[kAttackBase + enemy_perm_[j]];
    }
    out.push_back(std::move(mask));
  }
  return out;
}

std::vector<double> ShuffleWrapper::state() const {
  return state_in_order(inner_.battle(), inner_.config(), ally_perm_, enemy_perm_);
}

std::unique_ptr<Environment> make_environment(const BattleConfig& config, bool shuffled,
                                              std::uint64_t shuffle_seed) {
  if (shuffled) return std::make_unique<ShuffleWrapper>(config, shuffle_seed);
  return std::make_unique<BattleEnv>(config);
}

}  // namespace permnet
