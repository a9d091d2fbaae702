#include "permnet/agent_network.hpp"

#include <vector>

#include "permnet/ops.hpp"

namespace permnet {

Tensor AgentNetwork::forward(const Tensor& obs, ForwardContext ctx) const {
  if (obs.rank() != 2 || obs.dim(1) != layout_.obs_dim()) {
    throw DimensionError(std::string(kind()) + ": observation batch " +
                         shape_to_string(obs.shape()) + " does not match width " +
                         std::to_string(layout_.obs_dim()));
  }
  Tensor q = forward_unmasked(obs, ctx);
  const std::size_t n = obs.dim(0);
  const std::size_t n_actions = layout_.n_actions();
  std::vector<unsigned char> mask(n * n_actions, 0);
  bool any = false;
  const auto ov = obs.data();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < layout_.enemy_rows; ++j) {
      const double alive = ov[r * layout_.obs_dim() + layout_.enemy_offset() +
                              j * layout_.entity_dim + layout_.alive_column];
      if (alive == 0.0) {
        mask[r * n_actions + layout_.move_actions + j] = 1;
        any = true;
      }
    }
  }
  return any ? masked_fill(q, mask, kMaskedQ) : q;
}

Tensor AgentNetwork::own_features(const Tensor& obs) const {
  return narrow(obs, 1, 0, layout_.own_dim);
}

Tensor AgentNetwork::ally_rows(const Tensor& obs) const {
  return reshape(narrow(obs, 1, layout_.ally_offset(), layout_.ally_rows * layout_.entity_dim),
                 {obs.dim(0), layout_.ally_rows, layout_.entity_dim});
}

Tensor AgentNetwork::enemy_rows(const Tensor& obs) const {
  return reshape(narrow(obs, 1, layout_.enemy_offset(), layout_.enemy_rows * layout_.entity_dim),
                 {obs.dim(0), layout_.enemy_rows, layout_.entity_dim});
}

}  // namespace permnet
