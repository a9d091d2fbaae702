#pragma once

#include <cstddef>
#include <string_view>

#include "permnet/agent_network.hpp"
#include "permnet/hpn.hpp"
#include "permnet/module.hpp"

namespace permnet {

// MLP over the flat observation in the environment's entity order.
// Deliberately permutation sensitive.
class ConcatAgentNetwork : public AgentNetwork {
 public:
  // hidden = {64, 64} gives the plain baseline.
  ConcatAgentNetwork(const ObsLayout& layout, const std::vector<std::size_t>& hidden, Rng& rng,
                     std::string_view kind = "concat");

  std::string_view kind() const override { return kind_; }
  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParameter>& out) const override;
  const Mlp& mlp() const { return mlp_; }

 protected:
  Tensor forward_unmasked(const Tensor& obs, ForwardContext& ctx) const override;

 private:
  std::string_view kind_;
  Mlp mlp_;
};

// Parameter count of HpnAgentNetwork for a layout, without building it.
std::size_t hpn_parameter_count(const ObsLayout& layout, const HpnConfig& config);

// Smallest width w >= 64 such that the two-hidden-layer concat MLP
// obs_dim -> w -> w -> n_actions has more parameters than the HPN network.
std::size_t big_concat_width(const ObsLayout& layout, const HpnConfig& config);

// The BIG concat baseline. Throws std::logic_error if, for any reason, its
// parameter count does not exceed the HPN count for the same layout.
class BigConcatAgentNetwork : public ConcatAgentNetwork {
 public:
  BigConcatAgentNetwork(const ObsLayout& layout, const HpnConfig& reference, Rng& rng);
};

enum class Pooling { kSum, kMean, kMax };

Pooling parse_pooling(std::string_view name);

// Shared embedding phi applied to every row of X (N, m, k), then pooled
// over the rows: (N, h). Sum pooling is bitwise order independent.
Tensor deepset_pool(const Dense& phi, const Tensor& entities, Pooling pooling);

struct DeepSetConfig {
  std::size_t embed_dim = 64;
  Pooling pooling = Pooling::kSum;
};

// hidden = relu(trunk(relu(own(o) + pool(phi_ally(allies)) + pool(phi_enemy(enemies)))))
// with a dense move head and a dense attack head over the pooled hidden
// vector (invariant, not equivariant).
class DeepSetAgentNetwork : public AgentNetwork {
 public:
  DeepSetAgentNetwork(const ObsLayout& layout, const DeepSetConfig& config, Rng& rng);

  std::string_view kind() const override { return "deepset"; }
  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParameter>& out) const override;

 protected:
  Tensor forward_unmasked(const Tensor& obs, ForwardContext& ctx) const override;
  Tensor hidden(const Tensor& obs) const;

  DeepSetConfig config_;
  Dense own_dense_;
  Dense ally_phi_;
  Dense enemy_phi_;
  Dense trunk_;
  Dense move_head_;
  Dense attack_head_;
};

// Deep Set input path with the HPN hypernetwork attack head.
class HpnSetAgentNetwork : public AgentNetwork {
 public:
  HpnSetAgentNetwork(const ObsLayout& layout, const DeepSetConfig& set_config,
                     const HpnConfig& hpn_config, Rng& rng);

  std::string_view kind() const override { return "hpn_set"; }
  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParameter>& out) const override;
  const HyperLayer& attack_head() const { return attack_head_; }

 protected:
  Tensor forward_unmasked(const Tensor& obs, ForwardContext& ctx) const override;

 private:
  DeepSetConfig config_;
  Dense own_dense_;
  Dense ally_phi_;
  Dense enemy_phi_;
  Dense trunk_;
  Dense move_head_;
  HyperLayer attack_head_;
};

}  // namespace permnet
