#include "permnet/hpn.hpp"

#include <vector>

#include "permnet/ops.hpp"

namespace permnet {

namespace {

std::vector<std::size_t> hyper_sizes(std::size_t in, std::size_t hidden, std::size_t layers,
                                     std::size_t out) {
  if (layers < 1) throw std::invalid_argument("hypernetwork needs at least one layer");
  std::vector<std::size_t> sizes{in};
  for (std::size_t i = 1; i < layers; ++i) sizes.push_back(hidden);
  sizes.push_back(out);
  return sizes;
}

// Normalises X to (N, m, k); `batched` records whether it already was.
Tensor as_batch(const Tensor& entities, std::size_t k, bool& batched, const char* op) {
  if (entities.rank() == 3 && entities.dim(2) == k) {
    batched = true;
    return entities;
  }
  if (entities.rank() == 2 && entities.dim(1) == k) {
    batched = false;
    return reshape(entities, {1, entities.dim(0), k});
  }
  throw DimensionError(std::string(op) + ": entity rows " + shape_to_string(entities.shape()) +
                       " do not have feature width " + std::to_string(k));
}

}  // namespace

HyperLayer::HyperLayer(Mode mode, std::size_t entity_dim, std::size_t embed_dim,
                       std::size_t hidden_dim, std::size_t layer_num, Rng& rng, bool shared_bias)
    : mode_(mode), entity_dim_(entity_dim), embed_dim_(embed_dim), has_bias_(shared_bias) {
  const std::size_t out = mode == Mode::kInput ? entity_dim * embed_dim : embed_dim + 1;
  hyper_net_ = Mlp(hyper_sizes(entity_dim, hidden_dim, layer_num, out), rng);
  if (shared_bias) {
    if (mode != Mode::kInput) throw std::invalid_argument("shared bias only applies to input mode");
    bias_ = Tensor::zeros({embed_dim}, true);
  }
}

void HyperLayer::collect_parameters(const std::string& prefix,
                                    std::vector<NamedParameter>& out) const {
  hyper_net_.collect_parameters(prefix + "hyper.", out);
  if (has_bias_) out.push_back({prefix + "bias", bias_});
}

Tensor HyperLayer::generate(const Tensor& entities) const { return hyper_net_.forward(entities); }

Tensor hpn_input_layer(const HyperLayer& layer, const Tensor& entities) {
  if (layer.mode() != HyperLayer::Mode::kInput) {
    throw std::invalid_argument("hpn_input_layer: layer is not in input mode");
  }
  const std::size_t k = layer.entity_dim();
  const std::size_t h = layer.embed_dim();
  bool batched = false;
  const Tensor x = as_batch(entities, k, batched, "hpn_input_layer");
  const std::size_t n = x.dim(0);
  const std::size_t m = x.dim(1);

  Tensor out;
  if (m == 0) {
    out = Tensor::zeros({n, h});
  } else {
    const Tensor rows = reshape(x, {n * m, k});
    const Tensor embedded = row_vecmat(rows, layer.generate(rows));  // (n*m, h)
    out = set_sum(reshape(embedded, {n, m, h}), 1);
  }
  if (layer.has_shared_bias()) out = add(out, layer.shared_bias());
  return batched ? out : reshape(out, {h});
}

Tensor hpn_output_layer(const HyperLayer& layer, const Tensor& hidden, const Tensor& entities) {
  if (layer.mode() != HyperLayer::Mode::kOutput) {
    throw std::invalid_argument("hpn_output_layer: layer is not in output mode");
  }
  const std::size_t k = layer.entity_dim();
  const std::size_t h = layer.embed_dim();
  bool batched = false;
  const Tensor x = as_batch(entities, k, batched, "hpn_output_layer");
  const std::size_t n = x.dim(0);
  const std::size_t m = x.dim(1);
  const bool hidden_ok = batched ? (hidden.rank() == 2 && hidden.dim(0) == n && hidden.dim(1) == h)
                                 : (hidden.rank() == 1 && hidden.dim(0) == h);
  if (!hidden_ok) {
    throw DimensionError("hpn_output_layer: hidden " + shape_to_string(hidden.shape()) +
                         " does not match generated weight width " + std::to_string(h));
  }
  if (m == 0) return batched ? Tensor::zeros({n, 0}) : Tensor::zeros({0});

  const Tensor generated = reshape(layer.generate(reshape(x, {n * m, k})), {n, m, h + 1});
  const Tensor weights = narrow(generated, 2, 0, h);                   // (n, m, h)
  const Tensor biases = reshape(narrow(generated, 2, h, 1), {n, m});   // (n, m)
  const Tensor scores = reshape(bmm(weights, reshape(hidden, {n, h, 1})), {n, m});
  const Tensor q = add(scores, biases);
  return batched ? q : reshape(q, {m});
}

HpnAgentNetwork::HpnAgentNetwork(const ObsLayout& layout, const HpnConfig& config, Rng& rng)
    : AgentNetwork(layout), config_(config) {
  const std::size_t h = config.embed_dim;
  own_dense_ = Dense(layout.own_dim, h, rng);
  ally_input_ = HyperLayer(HyperLayer::Mode::kInput, layout.entity_dim, h, config.hyper_hidden_dim,
                           config.hyper_layer_num, rng);
  enemy_input_ = HyperLayer(HyperLayer::Mode::kInput, layout.entity_dim, h,
                            config.hyper_hidden_dim, config.hyper_layer_num, rng);
  trunk_ = Dense(h, h, rng);
  move_head_ = Dense(h, layout.move_actions, rng);
  attack_head_ = HyperLayer(HyperLayer::Mode::kOutput, layout.entity_dim, h,
                            config.hyper_hidden_dim, config.hyper_layer_num, rng);
}

void HpnAgentNetwork::collect_parameters(const std::string& prefix,
                                         std::vector<NamedParameter>& out) const {
  own_dense_.collect_parameters(prefix + "own.", out);
  ally_input_.collect_parameters(prefix + "ally_input.", out);
  enemy_input_.collect_parameters(prefix + "enemy_input.", out);
  trunk_.collect_parameters(prefix + "trunk.", out);
  move_head_.collect_parameters(prefix + "move_head.", out);
  attack_head_.collect_parameters(prefix + "attack_head.", out);
}

Tensor HpnAgentNetwork::forward_unmasked(const Tensor& obs, ForwardContext&) const {
  const Tensor enemies = enemy_rows(obs);
  Tensor embedding = own_dense_.forward(own_features(obs));
  embedding = add(embedding, hpn_input_layer(ally_input_, ally_rows(obs)));
  embedding = add(embedding, hpn_input_layer(enemy_input_, enemies));
  const Tensor hidden = relu(trunk_.forward(relu(embedding)));
  const Tensor move_q = move_head_.forward(hidden);
  const Tensor attack_q = hpn_output_layer(attack_head_, hidden, enemies);
  const Tensor parts[] = {move_q, attack_q};
  return concat(parts, 1);
}

}  // namespace permnet
