#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "permnet/observation.hpp"
#include "permnet/rng.hpp"

namespace permnet {

enum class Team { kAlly, kEnemy };

struct Position {
  int x = 0;
  int y = 0;
  bool operator==(const Position&) const = default;
};

int chebyshev(Position a, Position b);
int manhattan(Position a, Position b);

struct EntityState {
  Position pos;
  int health = 0;
  bool alive = false;
  Team team = Team::kAlly;
  bool operator==(const EntityState&) const = default;
};

struct BattleConfig {
  int width = 8;
  int height = 8;
  std::size_t n_allies = 3;
  std::size_t n_enemies = 3;
  int max_health = 10;
  int attack_range = 1;  // Chebyshev
  int attack_damage = 2;
  int episode_limit = 60;
  double damage_scale = 0.1;
  double kill_bonus = 1.0;
  double win_bonus = 10.0;

  void validate() const;
  ObsLayout layout() const;
  std::size_t state_dim() const { return (n_allies + n_enemies) * 4; }
};

// Named presets: "3v3" (default), "2v3", "5v6", "8v9".
BattleConfig battle_preset(std::string_view name);
std::vector<std::string> battle_preset_names();

struct BattleState {
  std::vector<EntityState> allies;
  std::vector<EntityState> enemies;
  int step = 0;
  bool operator==(const BattleState&) const = default;
};

// Per-agent action encoding. Attack actions follow the move block:
// action kAttackBase + e attacks enemy e.
enum Action : int {
  kNoop = 0,
  kStop = 1,
  kNorth = 2,  // y + 1
  kSouth = 3,  // y - 1
  kEast = 4,   // x + 1
  kWest = 5,   // x - 1
  kAttackBase = 6,
};
inline constexpr std::size_t kMoveActions = 6;

struct StepResult {
  double reward = 0.0;
  bool terminated = false;  // one team eliminated
  bool truncated = false;   // episode_limit reached without elimination
  bool won = false;
  double damage_dealt = 0.0;
  int kills = 0;
  bool done() const { return terminated || truncated; }
};

class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

using ActionMask = std::vector<unsigned char>;

// Common interface of the battle environment and its wrappers.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual void reset(std::uint64_t seed) = 0;
  // Throws ContractViolation if any action is unavailable.
  virtual StepResult step(const std::vector<int>& actions) = 0;

  virtual std::vector<ObservationSet> observations() const = 0;
  virtual std::vector<ActionMask> available_actions() const = 0;
  virtual std::vector<double> state() const = 0;

  virtual const BattleConfig& config() const = 0;
  virtual const BattleState& battle() const = 0;

  ObsLayout layout() const { return config().layout(); }
  std::size_t n_agents() const { return config().n_allies; }
  std::size_t n_actions() const { return layout().n_actions(); }
  bool won() const;
  bool finished() const;
};

// Fully observable grid battle between learning allies and scripted enemies.
//
// Step resolution: ally moves in agent-index order (a blocked mover stays),
// simultaneous ally attacks, then the scripted enemy phase (moves in
// enemy-index order, simultaneous attacks).
class BattleEnv : public Environment {
 public:
  explicit BattleEnv(BattleConfig config);

  void reset(std::uint64_t seed) override;
  StepResult step(const std::vector<int>& actions) override;

  std::vector<ObservationSet> observations() const override;
  std::vector<ActionMask> available_actions() const override;
  std::vector<double> state() const override;

  const BattleConfig& config() const override { return config_; }
  const BattleState& battle() const override { return state_; }

  // Observation and mask of one agent, with the ally rows listed in
  // `ally_order` (excluding the agent itself) and enemy row j showing enemy
  // enemy_order[j]. Identity orders give the canonical view.
  ObservationSet observe(std::size_t agent, std::span<const std::size_t> ally_order,
                         std::span<const std::size_t> enemy_order) const;
  ActionMask available(std::size_t agent) const;

  // Places the battle into an explicit state (tests, replays).
  void set_state(BattleState state);

 private:
  bool occupied(Position p) const;
  bool in_bounds(Position p) const;

  BattleConfig config_;
  BattleState state_;
};

// Enemy actions for the current state, in the same encoding as ally actions
// with attack index = ally index. Each living enemy attacks the
// lowest-index living ally in range; otherwise it steps toward the nearest
// ally (Chebyshev, lowest index on ties), preferring x-axis moves and then
// the negative direction among moves that shorten the Manhattan distance
// without lengthening the Chebyshev distance and land on a free cell.
std::vector<int> scripted_enemy_policy(const BattleState& state, const BattleConfig& config);

// Presents the environment with one ally order and one enemy order drawn per
// reset. Enemy row j and attack action j refer to canonical enemy
// enemy_permutation()[j]; ally rows are listed in ally_permutation() order.
class ShuffleWrapper : public Environment {
 public:
  ShuffleWrapper(BattleConfig config, std::uint64_t shuffle_seed);

  void reset(std::uint64_t seed) override;
  StepResult step(const std::vector<int>& actions) override;

  std::vector<ObservationSet> observations() const override;
  std::vector<ActionMask> available_actions() const override;
  std::vector<double> state() const override;

  const BattleConfig& config() const override { return inner_.config(); }
  const BattleState& battle() const override { return inner_.battle(); }

  const std::vector<std::size_t>& ally_permutation() const { return ally_perm_; }
  const std::vector<std::size_t>& enemy_permutation() const { return enemy_perm_; }
  // Maps a wrapped action to the canonical environment's action.
  int to_canonical(int action) const;
  // Overrides the permutations drawn at the last reset.
  void set_permutations(std::vector<std::size_t> ally, std::vector<std::size_t> enemy);

 private:
  BattleEnv inner_;
  Rng rng_;
  std::vector<std::size_t> ally_perm_;
  std::vector<std::size_t> enemy_perm_;
};

std::unique_ptr<Environment> make_environment(const BattleConfig& config, bool shuffled,
                                              std::uint64_t shuffle_seed);

}  // namespace permnet
