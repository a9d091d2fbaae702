#include "permnet/observation.hpp"

#include <algorithm>
#include <string>

namespace permnet {

std::vector<double> ObservationSet::flatten() const {
  std::vector<double> out;
  out.reserve(own.size() + allies.values.size() + enemies.values.size());
  out.insert(out.end(), own.begin(), own.end());
  out.insert(out.end(), allies.values.begin(), allies.values.end());
  out.insert(out.end(), enemies.values.begin(), enemies.values.end());
  return out;
}

ObservationSet ObservationSet::unflatten(std::span<const double> flat, const ObsLayout& layout) {
  if (flat.size() != layout.obs_dim()) {
    throw DimensionError("observation of width " + std::to_string(flat.size()) +
                         " does not match layout width " + std::to_string(layout.obs_dim()));
  }
  ObservationSet obs;
  obs.own.assign(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(layout.own_dim));
  auto take = [&](std::size_t offset, std::size_t rows) {
    EntityRows r{rows, layout.entity_dim, {}};
    auto begin = flat.begin() + static_cast<std::ptrdiff_t>(offset);
    r.values.assign(begin, begin + static_cast<std::ptrdiff_t>(rows * layout.entity_dim));
    return r;
  };
  obs.allies = take(layout.ally_offset(), layout.ally_rows);
  obs.enemies = take(layout.enemy_offset(), layout.enemy_rows);
  return obs;
}

Tensor stack_observations(std::span<const ObservationSet> observations, const ObsLayout& layout) {
  std::vector<double> data;
  data.reserve(observations.size() * layout.obs_dim());
  for (const auto& o : observations) {
    if (o.own.size() != layout.own_dim || o.allies.rows != layout.ally_rows ||
        o.enemies.rows != layout.enemy_rows || o.allies.cols != layout.entity_dim ||
        o.enemies.cols != layout.entity_dim) {
      throw DimensionError("observation group sizes do not match the configured layout");
    }
    auto flat = o.flatten();
    data.insert(data.end(), flat.begin(), flat.end());
  }
  return Tensor({observations.size(), layout.obs_dim()}, std::move(data));
}

EntityRows permute_rows(const EntityRows& rows, std::span<const std::size_t> perm) {
  if (perm.size() != rows.rows) {
    throw DimensionError("permutation of size " + std::to_string(perm.size()) + " for " +
                         std::to_string(rows.rows) + " rows");
  }
  EntityRows out{rows.rows, rows.cols, std::vector<double>(rows.values.size())};
  for (std::size_t i = 0; i < rows.rows; ++i) {
    std::copy_n(rows.values.begin() + static_cast<std::ptrdiff_t>(perm[i] * rows.cols), rows.cols,
                out.values.begin() + static_cast<std::ptrdiff_t>(i * rows.cols));
  }
  return out;
}

}  // namespace permnet
