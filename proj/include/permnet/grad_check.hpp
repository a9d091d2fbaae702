#pragma once

#include <functional>
#include <span>
#include <vector>

#include "permnet/tensor.hpp"

namespace permnet {

using ScalarFunction = std::function<Tensor(std::span<const Tensor>)>;

// Compares reverse-mode gradients of a scalar-valued f against central
// differences with step h. Returns the maximum over all input components of
// |analytic - numeric| / max(1, |analytic|). Inputs are leaves; their grads
// are overwritten.
double grad_check(const ScalarFunction& f, std::vector<Tensor>& inputs, double h = 1e-5);

}  // namespace permnet
