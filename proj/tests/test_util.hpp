#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "permnet/observation.hpp"
#include "permnet/rng.hpp"
#include "permnet/tensor.hpp"

namespace permnet::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = false) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

// Flat observation with random own/ally/enemy features; every entity alive.
inline std::vector<double> random_observation(const ObsLayout& l, Rng& rng) {
  std::vector<double> o(l.obs_dim());
  for (double& x : o) x = rng.uniform(-1.0, 1.0);
  for (std::size_t i = 0; i < l.ally_rows; ++i) o[l.ally_offset() + i * l.entity_dim + l.alive_column] = 1.0;
  for (std::size_t j = 0; j < l.enemy_rows; ++j) o[l.enemy_offset() + j * l.entity_dim + l.alive_column] = 1.0;
  return o;
}

// Row i of each group in the result is row perm[i] of the input.
inline std::vector<double> permute_observation(const std::vector<double>& o, const ObsLayout& l,
                                               const std::vector<std::size_t>& ally_perm,
                                               const std::vector<std::size_t>& enemy_perm) {
  std::vector<double> p = o;
  const std::size_t k = l.entity_dim;
  for (std::size_t i = 0; i < ally_perm.size(); ++i) {
    std::copy_n(o.begin() + static_cast<long>(l.ally_offset() + ally_perm[i] * k), k,
                p.begin() + static_cast<long>(l.ally_offset() + i * k));
  }
  for (std::size_t j = 0; j < enemy_perm.size(); ++j) {
    std::copy_n(o.begin() + static_cast<long>(l.enemy_offset() + enemy_perm[j] * k), k,
                p.begin() + static_cast<long>(l.enemy_offset() + j * k));
  }
  return p;
}

inline std::vector<std::vector<std::size_t>> all_permutations(std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  std::vector<std::vector<std::size_t>> out;
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace permnet::testing
