#include "permnet/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace permnet {

namespace {

double evaluate(const ScalarFunction& f, std::span<const Tensor> inputs) {
  const Tensor out = f(inputs);
  if (out.numel() != 1) {
    throw DimensionError("grad_check: function must return a scalar, got " +
                         shape_to_string(out.shape()));
  }
  const double v = out.item();
  if (std::isnan(v)) throw NumericError("grad_check: function returned NaN");
  return v;
}

}  // namespace

double grad_check(const ScalarFunction& f, std::vector<Tensor>& inputs, double h) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  const Tensor out = f(inputs);
  if (out.numel() != 1) {
    throw DimensionError("grad_check: function must return a scalar, got " +
                         shape_to_string(out.shape()));
  }
  if (std::isnan(out.item())) throw NumericError("grad_check: function returned NaN");
  out.backward();

  std::vector<std::vector<double>> analytic;
  for (const auto& t : inputs) {
    if (t.has_grad()) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      analytic.emplace_back(t.numel(), 0.0);
    }
  }

  double worst = 0.0;
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto values = inputs[k].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double plus = evaluate(f, inputs);
      values[i] = saved - h;
      const double minus = evaluate(f, inputs);
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = analytic[k][i];
      worst = std::max(worst, std::fabs(a - numeric) / std::max(1.0, std::fabs(a)));
    }
  }
  return worst;
}

}  // namespace permnet
