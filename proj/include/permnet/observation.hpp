#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "permnet/tensor.hpp"

namespace permnet {

// Sizes of one agent's factored observation and its action space.
//
// Flat layout: [own (own_dim) | ally rows (ally_rows * entity_dim) |
//               enemy rows (enemy_rows * entity_dim)].
// Action layout: [move actions (move_actions) | attack enemy 0..enemy_rows-1].
struct ObsLayout {
  std::size_t own_dim = 3;
  std::size_t entity_dim = 4;
  std::size_t ally_rows = 2;
  std::size_t enemy_rows = 3;
  std::size_t move_actions = 6;
  // Column of the alive flag inside an entity row.
  std::size_t alive_column = 3;

  std::size_t ally_offset() const { return own_dim; }
  std::size_t enemy_offset() const { return own_dim + ally_rows * entity_dim; }
  std::size_t obs_dim() const { return enemy_offset() + enemy_rows * entity_dim; }
  std::size_t n_actions() const { return move_actions + enemy_rows; }

  bool operator==(const ObsLayout&) const = default;
};

// Row-major (rows, cols) block of entity features.
struct EntityRows {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values).subspan(i * cols, cols);
  }
  std::span<double> row(std::size_t i) { return std::span<double>(values).subspan(i * cols, cols); }

  bool operator==(const EntityRows&) const = default;
};

// An agent's observation factored into own features, the ally group and the
// enemy group.
struct ObservationSet {
  std::vector<double> own;
  EntityRows allies;
  EntityRows enemies;

  std::vector<double> flatten() const;
  static ObservationSet unflatten(std::span<const double> flat, const ObsLayout& layout);
  bool operator==(const ObservationSet&) const = default;
};

// Stacks observations into an (N, obs_dim) tensor.
Tensor stack_observations(std::span<const ObservationSet> observations, const ObsLayout& layout);

// Reorders entity rows: output row i is input row perm[i].
EntityRows permute_rows(const EntityRows& rows, std::span<const std::size_t> perm);

}  // namespace permnet
