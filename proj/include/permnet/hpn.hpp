#pragma once

#include <cstddef>
#include <string_view>

#include "permnet/agent_network.hpp"
#include "permnet/module.hpp"

namespace permnet {

// Hypernetwork mapping one entity's features to that entity's weights.
//
// Input mode: hyper_net(x_i) is reshaped to W_i (k, h) and the layer returns
// sum_i x_i W_i (+ b when a shared bias is configured).
// Output mode: hyper_net(x_i) yields w_i (h) followed by a scalar bias b_i,
// and the layer returns one value per entity, hidden . w_i + b_i.
class HyperLayer : public Module {
 public:
  enum class Mode { kInput, kOutput };

  HyperLayer() = default;
  // hyper_net has `layer_num` dense layers: k -> hidden_dim -> ... -> out.
  HyperLayer(Mode mode, std::size_t entity_dim, std::size_t embed_dim, std::size_t hidden_dim,
             std::size_t layer_num, Rng& rng, bool shared_bias = false);

  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParameter>& out) const override;

  Mode mode() const { return mode_; }
  std::size_t entity_dim() const { return entity_dim_; }
  std::size_t embed_dim() const { return embed_dim_; }
  const Mlp& hyper_net() const { return hyper_net_; }
  Mlp& hyper_net() { return hyper_net_; }
  bool has_shared_bias() const { return has_bias_; }
  const Tensor& shared_bias() const { return bias_; }

  // Raw hyper_net output for a batch of entity rows (R, k).
  Tensor generate(const Tensor& entities) const;

 private:
  Mode mode_ = Mode::kInput;
  std::size_t entity_dim_ = 0;
  std::size_t embed_dim_ = 0;
  Mlp hyper_net_;
  bool has_bias_ = false;
  Tensor bias_;
};

// X (m, k) -> (h), or batched X (N, m, k) -> (N, h). Entity contributions are
// pooled with set_sum, so the result is bitwise invariant to row order.
Tensor hpn_input_layer(const HyperLayer& layer, const Tensor& entities);

// hidden (h), X (m, k) -> (m); batched hidden (N, h), X (N, m, k) -> (N, m).
// Output row i depends only on hidden and x_i.
Tensor hpn_output_layer(const HyperLayer& layer, const Tensor& hidden, const Tensor& entities);

struct HpnConfig {
  std::size_t embed_dim = 64;       // h, also the trunk width
  std::size_t hyper_hidden_dim = 64;
  std::size_t hyper_layer_num = 2;
};

// Own features through a plain dense layer, ally and enemy groups through
// hypernetwork input layers, a dense relu trunk, a dense move head and a
// hypernetwork attack head with one output per enemy row.
class HpnAgentNetwork : public AgentNetwork {
 public:
  HpnAgentNetwork(const ObsLayout& layout, const HpnConfig& config, Rng& rng);

  std::string_view kind() const override { return "hpn"; }
  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParameter>& out) const override;

  const HyperLayer& ally_input() const { return ally_input_; }
  const HyperLayer& enemy_input() const { return enemy_input_; }
  const HyperLayer& attack_head() const { return attack_head_; }

 protected:
  Tensor forward_unmasked(const Tensor& obs, ForwardContext& ctx) const override;

 private:
  HpnConfig config_;
  Dense own_dense_;  // its bias is the shared input-layer bias
  HyperLayer ally_input_;
  HyperLayer enemy_input_;
  Dense trunk_;
  Dense move_head_;
  HyperLayer attack_head_;
};

}  // namespace permnet
