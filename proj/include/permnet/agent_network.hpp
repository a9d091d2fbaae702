#pragma once

#include <string_view>

#include "permnet/module.hpp"
#include "permnet/observation.hpp"
#include "permnet/rng.hpp"

namespace permnet {

inline constexpr double kMaskedQ = -1e10;

struct ForwardContext {
  // Noise-free evaluation. Only DPN consults these.
  bool deterministic = true;
  Rng* rng = nullptr;
};

// Per-agent Q-network over stacked flat observations.
class AgentNetwork : public Module {
 public:
  explicit AgentNetwork(ObsLayout layout) : layout_(layout) {}

  // obs (N, obs_dim) -> Q (N, n_actions). Attack Q-values of enemy rows whose
  // alive flag is 0 are replaced by kMaskedQ.
  Tensor forward(const Tensor& obs, ForwardContext ctx = {}) const;

  const ObsLayout& layout() const { return layout_; }
  virtual std::string_view kind() const = 0;

 protected:
  virtual Tensor forward_unmasked(const Tensor& obs, ForwardContext& ctx) const = 0;

  // Slices of a stacked observation batch.
  Tensor own_features(const Tensor& obs) const;
  Tensor ally_rows(const Tensor& obs) const;   // (N, ally_rows, entity_dim)
  Tensor enemy_rows(const Tensor& obs) const;  // (N, enemy_rows, entity_dim)

 private:
  ObsLayout layout_;
};

}  // namespace permnet
