#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "permnet/tensor.hpp"

namespace permnet {

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  static AdamState for_parameters(std::span<const NamedParameter> params, AdamConfig config = {});
};

// One bias-corrected Adam update using each parameter's accumulated grad.
// Parameters without a grad are treated as having zero gradient. Throws
// NumericError naming the parameter if a gradient is NaN.
void adam_step(std::span<NamedParameter> params, AdamState& state);

// Clears accumulated gradients.
void zero_grad(std::span<NamedParameter> params);

// Rescales gradients so their joint L2 norm is at most max_norm. Returns the
// norm before clipping.
double clip_grad_norm(std::span<NamedParameter> params, double max_norm);

}  // namespace permnet
