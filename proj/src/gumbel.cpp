#include "permnet/gumbel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "permnet/ops.hpp"

namespace permnet {

void GumbelConfig::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("gumbel: tau must be positive");
}

double sample_gumbel(Rng& rng) {
  const double u = std::clamp(rng.uniform(), 1e-10, 1.0 - 1e-10);
  return -std::log(-std::log(u));
}

Tensor gumbel_softmax(const Tensor& logits, const GumbelConfig& config, Rng* rng) {
  config.validate();
  if (logits.rank() == 0) throw DimensionError("gumbel_softmax: scalar logits");
  if (!config.deterministic && rng == nullptr) {
    throw std::invalid_argument("gumbel_softmax: noisy sampling needs a random stream");
  }
  const std::size_t n = logits.shape().back();
  const std::size_t rows = n == 0 ? 0 : logits.numel() / n;
  const auto lv = logits.data();

  std::vector<double> noise(logits.numel(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    bool any_finite = false;
    for (std::size_t j = 0; j < n; ++j) any_finite = any_finite || std::isfinite(lv[r * n + j]);
    if (!any_finite) throw NumericError("fully masked logits");
  }
  if (!config.deterministic) {
    for (double& g : noise) g = sample_gumbel(*rng);
  }

  Tensor perturbed = config.deterministic
                         ? logits
                         : add(logits, Tensor(logits.shape(), noise));
  Tensor soft = softmax(scale(perturbed, 1.0 / config.tau), logits.rank() - 1);
  if (!config.hard) return soft;

  const auto pv = perturbed.data();
  std::vector<double> one_hot(logits.numel(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j) {
      if (pv[r * n + j] > pv[r * n + best]) best = j;
    }
    one_hot[r * n + best] = 1.0;
  }
  return straight_through(Tensor(logits.shape(), std::move(one_hot)), soft);
}

Tensor sinkhorn_normalize(const Tensor& logits, std::size_t iterations, double tau) {
  if (logits.rank() != 2 || logits.dim(0) != logits.dim(1)) {
    throw DimensionError("sinkhorn_normalize: expected a square matrix, got " +
                         shape_to_string(logits.shape()));
  }
  if (iterations < 1) throw std::invalid_argument("sinkhorn_normalize: iterations must be >= 1");
  if (!(tau > 0.0)) throw std::invalid_argument("sinkhorn_normalize: tau must be positive");

  // The global shift cancels under normalisation and keeps exp in range.
  const auto lv = logits.data();
  const double hi = *std::max_element(lv.begin(), lv.end());
  Tensor p = exp(scale(add_scalar(logits, -hi), 1.0 / tau));
  for (std::size_t it = 0; it < iterations; ++it) {
    // Rows: normalise columns of the transpose.
    Tensor pt = transpose(p);
    pt = div(pt, sum(pt, 0));
    p = transpose(pt);
    p = div(p, sum(p, 0));
  }
  return p;
}

}  // namespace permnet
