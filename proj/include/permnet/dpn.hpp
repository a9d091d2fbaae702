#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string_view>

#include "permnet/agent_network.hpp"
#include "permnet/gumbel.hpp"
#include "permnet/module.hpp"

namespace permnet {

// Masking constant added to logits of already-assigned positions.
inline constexpr double kAssignedMask = -1e10;

// True iff `entries` is a (rows, cols) 0/1 matrix with exactly one 1 in every
// row and every column.
bool is_permutation_matrix(std::span<const double> entries, std::size_t rows, std::size_t cols);

// Shared assignment MLP theta (k -> hidden -> width) producing, for each
// input entity, logits over the `width` canonical slots.
class DpnNet : public Module {
 public:
  DpnNet() = default;
  DpnNet(std::size_t entity_dim, std::size_t width, std::size_t hidden_dim, GumbelConfig gumbel,
         Rng& rng);

  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParameter>& out) const override;

  std::size_t width() const { return width_; }
  std::size_t entity_dim() const { return assign_mlp_.in_features(); }
  const GumbelConfig& gumbel() const { return gumbel_; }
  const Mlp& assign_mlp() const { return assign_mlp_; }
  Mlp& assign_mlp() { return assign_mlp_; }

 private:
  std::size_t width_ = 0;
  Mlp assign_mlp_;
  GumbelConfig gumbel_;
};

// Converts slot-major logits (m', m) (or batched (N, m', m)) into a
// permutation matrix row by row: each row's already-assigned columns get
// kAssignedMask added, a hard Gumbel-softmax sample picks one column, and the
// pick is recorded in the invalid mask. Gradients flow through the
// straight-through estimator.
Tensor assign_rows(const Tensor& slot_logits, const GumbelConfig& gumbel, Rng* rng);

// Full generation: L = MLP(X) (m, m'), transposed to (m', m), then
// assign_rows. X is (m, k) or (N, m, k). In deterministic mode no noise is
// drawn and ties go to the lowest column; otherwise `rng` must be set.
Tensor generate_permutation_matrix(const DpnNet& net, const Tensor& entities, bool deterministic,
                                   Rng* rng);

struct EquivariantSlice {
  std::size_t start = 0;
  std::size_t length = 0;
};

// Canonicalise, apply downstream, restore order on the equivariant rows:
//   M = generate_permutation_matrix(X); Y0 = downstream(M X);
//   rows [start, start+length) of Y0 are replaced by M^T times those rows.
// `downstream` maps (m, k) to a 2-D output whose first axis indexes rows.
Tensor dpn_forward(const DpnNet& net, const Tensor& entities,
                   const std::function<Tensor(const Tensor&)>& downstream,
                   std::optional<EquivariantSlice> equivariant, bool deterministic, Rng* rng);

struct DpnConfig {
  std::size_t permutation_net_dim = 8;
  std::size_t hidden_dim = 64;
  double tau = 0.5;
};

// Ally group canonicalised by M1, enemy group by M2, a fixed-order MLP over
// own + canonical groups, and M2^T applied to the attack Q-values.
class DpnAgentNetwork : public AgentNetwork {
 public:
  DpnAgentNetwork(const ObsLayout& layout, const DpnConfig& config, Rng& rng);

  std::string_view kind() const override { return "dpn"; }
  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParameter>& out) const override;

  const DpnNet& ally_net() const { return ally_net_; }
  const DpnNet& enemy_net() const { return enemy_net_; }
  const Mlp& downstream() const { return downstream_; }

 protected:
  Tensor forward_unmasked(const Tensor& obs, ForwardContext& ctx) const override;

 private:
  DpnNet ally_net_;
  DpnNet enemy_net_;
  Mlp downstream_;
};

}  // namespace permnet
