#include "permnet/optim.hpp"

#include <cmath>

namespace permnet {

AdamState AdamState::for_parameters(std::span<const NamedParameter> params, AdamConfig config) {
  AdamState state;
  state.config = config;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.tensor.numel(), 0.0);
    state.second_moment.emplace_back(p.tensor.numel(), 0.0);
  }
  return state;
}

void adam_step(std::span<NamedParameter> params, AdamState& state) {
  if (params.size() != state.first_moment.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) +
                         " parameters but state tracks " +
                         std::to_string(state.first_moment.size()));
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (params[p].tensor.numel() != state.first_moment[p].size()) {
      throw DimensionError("adam_step: moment shape mismatch for " + params[p].name);
    }
    for (double g : params[p].tensor.grad()) {
      if (std::isnan(g)) throw NumericError("adam_step: NaN gradient in parameter " + params[p].name);
    }
  }

  ++state.step;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& tensor = params[p].tensor;
    auto grad = tensor.grad();
    auto value = tensor.mutable_data();
    auto& m = state.first_moment[p];
    auto& v = state.second_moment[p];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      value[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

void zero_grad(std::span<NamedParameter> params) {
  for (auto& p : params) p.tensor.zero_grad();
}

double clip_grad_norm(std::span<NamedParameter> params, double max_norm) {
  double total = 0.0;
  for (const auto& p : params) {
    for (double g : p.tensor.grad()) total += g * g;
  }
  const double norm = std::sqrt(total);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (auto& p : params) {
      if (!p.tensor.has_grad()) continue;
      for (double& g : p.tensor.node().grad) g *= factor;
    }
  }
  return norm;
}

}  // namespace permnet
