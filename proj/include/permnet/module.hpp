#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "permnet/optim.hpp"
#include "permnet/rng.hpp"
#include "permnet/tensor.hpp"

namespace permnet {

class Module {
 public:
  virtual ~Module() = default;

  // Appends this module's parameters, names prefixed with `prefix`.
  virtual void collect_parameters(const std::string& prefix,
                                  std::vector<NamedParameter>& out) const = 0;

  std::vector<NamedParameter> parameters() const;
};

std::size_t count_parameters(const Module& module);

// Copies parameter values by name. Both modules must expose the same names
// and shapes.
void copy_parameters(const Module& from, Module& to);

enum class Activation { kNone, kRelu, kTanh, kElu };

Tensor activate(const Tensor& t, Activation activation);

// y = x W + b, with W (in, out). Weights and bias are drawn from
// uniform(-1/sqrt(in), 1/sqrt(in)).
class Dense : public Module {
 public:
  Dense() = default;
  Dense(std::size_t in, std::size_t out, Rng& rng, bool with_bias = true);

  Tensor forward(const Tensor& x) const;
  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParameter>& out) const override;

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }
  bool has_bias() const { return has_bias_; }

 private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
  bool has_bias_ = true;
  Tensor weight_;
  Tensor bias_;
};

// Stack of Dense layers with `hidden_activation` between them and no
// activation after the last layer.
class Mlp : public Module {
 public:
  Mlp() = default;
  // sizes = {in, hidden..., out}
  Mlp(const std::vector<std::size_t>& sizes, Rng& rng,
      Activation hidden_activation = Activation::kRelu);

  Tensor forward(const Tensor& x) const;
  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParameter>& out) const override;

  std::size_t in_features() const { return layers_.front().in_features(); }
  std::size_t out_features() const { return layers_.back().out_features(); }
  std::vector<Dense>& layers() { return layers_; }
  const std::vector<Dense>& layers() const { return layers_; }

 private:
  std::vector<Dense> layers_;
  Activation hidden_activation_ = Activation::kRelu;
};

}  // namespace permnet
