#pragma once

#include <cstddef>

#include "permnet/rng.hpp"
#include "permnet/tensor.hpp"

namespace permnet {

struct GumbelConfig {
  double tau = 0.5;
  bool hard = true;
  // No noise; hard selection is a plain argmax with first-max tie-break.
  bool deterministic = false;

  void validate() const;
};

// Gumbel noise -log(-log(u)) with u clamped to [1e-10, 1 - 1e-10].
double sample_gumbel(Rng& rng);

// Samples along the last axis. Logits are treated as unnormalised log
// probabilities; -inf (or -1e10) entries are masked. Soft mode returns
// softmax((logits + g) / tau). Hard mode returns the exact one-hot of
// argmax(logits + g) in the forward pass and the soft sample's gradient in
// the backward pass. `rng` may be null in deterministic mode.
Tensor gumbel_softmax(const Tensor& logits, const GumbelConfig& config, Rng* rng);

// exp(logits / tau), then `iterations` rounds of row normalisation followed
// by column normalisation. Differentiable. logits must be (m, m).
Tensor sinkhorn_normalize(const Tensor& logits, std::size_t iterations, double tau);

}  // namespace permnet
