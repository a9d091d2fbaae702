#include "permnet/module.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "permnet/ops.hpp"

namespace permnet {

std::vector<NamedParameter> Module::parameters() const {
  std::vector<NamedParameter> out;
  collect_parameters("", out);
  return out;
}

std::size_t count_parameters(const Module& module) {
  std::size_t total = 0;
  for (const auto& p : module.parameters()) total += p.tensor.numel();
  return total;
}

void copy_parameters(const Module& from, Module& to) {
  auto src = from.parameters();
  auto dst = to.parameters();
  if (src.size() != dst.size()) {
    throw DimensionError("copy_parameters: " + std::to_string(src.size()) + " vs " +
                         std::to_string(dst.size()) + " parameters");
  }
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& p : src) by_name[p.name] = &p.tensor;
  for (auto& p : dst) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw DimensionError("copy_parameters: missing " + p.name);
    if (it->second->shape() != p.tensor.shape()) {
      throw DimensionError("copy_parameters: shape mismatch for " + p.name);
    }
    std::copy(it->second->data().begin(), it->second->data().end(),
              p.tensor.mutable_data().begin());
  }
}

Tensor activate(const Tensor& t, Activation activation) {
  switch (activation) {
    case Activation::kNone: return t;
    case Activation::kRelu: return relu(t);
    case Activation::kTanh: return tanh(t);
    case Activation::kElu: return elu(t);
  }
  return t;
}

Dense::Dense(std::size_t in, std::size_t out, Rng& rng, bool with_bias)
    : in_(in), out_(out), has_bias_(with_bias) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(in, 1)));
  std::vector<double> w(in * out);
  for (double& x : w) x = rng.uniform(-bound, bound);
  weight_ = Tensor({in, out}, std::move(w), true);
  if (with_bias) {
    std::vector<double> b(out);
    for (double& x : b) x = rng.uniform(-bound, bound);
    bias_ = Tensor({out}, std::move(b), true);
  }
}

Tensor Dense::forward(const Tensor& x) const {
  if (has_bias_ && x.rank() == 2) return linear(x, weight_, bias_);
  Tensor y = matmul(x, weight_);
  return has_bias_ ? add(y, bias_) : y;
}

void Dense::collect_parameters(const std::string& prefix, std::vector<NamedParameter>& out) const {
  out.push_back({prefix + "weight", weight_});
  if (has_bias_) out.push_back({prefix + "bias", bias_});
}

Mlp::Mlp(const std::vector<std::size_t>& sizes, Rng& rng, Activation hidden_activation)
    : hidden_activation_(hidden_activation) {
  if (sizes.size() < 2) throw std::invalid_argument("Mlp needs at least input and output sizes");
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) layers_.emplace_back(sizes[i], sizes[i + 1], rng);
}

Tensor Mlp::forward(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(h);
    if (i + 1 < layers_.size()) h = activate(h, hidden_activation_);
  }
  return h;
}

void Mlp::collect_parameters(const std::string& prefix, std::vector<NamedParameter>& out) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect_parameters(prefix + std::to_string(i) + ".", out);
  }
}

}  // namespace permnet
