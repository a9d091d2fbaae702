#include "permnet/baselines.hpp"

#include <stdexcept>
#include <string>

#include "permnet/ops.hpp"

namespace permnet {

namespace {

std::vector<std::size_t> concat_sizes(const ObsLayout& layout,
                                      const std::vector<std::size_t>& hidden) {
  std::vector<std::size_t> sizes{layout.obs_dim()};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(layout.n_actions());
  return sizes;
}

std::size_t dense_count(std::size_t in, std::size_t out) { return in * out + out; }

std::size_t mlp_count(const std::vector<std::size_t>& sizes) {
  std::size_t total = 0;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) total += dense_count(sizes[i], sizes[i + 1]);
  return total;
}

std::size_t hyper_count(std::size_t k, std::size_t hidden, std::size_t layers, std::size_t out) {
  std::vector<std::size_t> sizes{k};
  for (std::size_t i = 1; i < layers; ++i) sizes.push_back(hidden);
  sizes.push_back(out);
  return mlp_count(sizes);
}

}  // namespace

ConcatAgentNetwork::ConcatAgentNetwork(const ObsLayout& layout,
                                       const std::vector<std::size_t>& hidden, Rng& rng,
                                       std::string_view kind)
    : AgentNetwork(layout), kind_(kind), mlp_(concat_sizes(layout, hidden), rng) {}

void ConcatAgentNetwork::collect_parameters(const std::string& prefix,
                                            std::vector<NamedParameter>& out) const {
  mlp_.collect_parameters(prefix + "mlp.", out);
}

Tensor ConcatAgentNetwork::forward_unmasked(const Tensor& obs, ForwardContext&) const {
  return mlp_.forward(obs);
}

std::size_t hpn_parameter_count(const ObsLayout& layout, const HpnConfig& config) {
  const std::size_t h = config.embed_dim;
  const std::size_t k = layout.entity_dim;
  return dense_count(layout.own_dim, h) +
         2 * hyper_count(k, config.hyper_hidden_dim, config.hyper_layer_num, k * h) +
         dense_count(h, h) + dense_count(h, layout.move_actions) +
         hyper_count(k, config.hyper_hidden_dim, config.hyper_layer_num, h + 1);
}

std::size_t big_concat_width(const ObsLayout& layout, const HpnConfig& config) {
  const std::size_t target = hpn_parameter_count(layout, config);
  std::size_t width = 64;
  while (mlp_count(concat_sizes(layout, {width, width})) <= target) ++width;
  return width;
}

BigConcatAgentNetwork::BigConcatAgentNetwork(const ObsLayout& layout, const HpnConfig& reference,
                                             Rng& rng)
    : ConcatAgentNetwork(layout,
                         {big_concat_width(layout, reference), big_concat_width(layout, reference)},
                         rng, "big_concat") {
  const std::size_t hpn = hpn_parameter_count(layout, reference);
  const std::size_t own = count_parameters(*this);
  if (own <= hpn) {
    throw std::logic_error("big_concat has " + std::to_string(own) +
                           " parameters, not more than hpn's " + std::to_string(hpn));
  }
}

Pooling parse_pooling(std::string_view name) {
  if (name == "sum") return Pooling::kSum;
  if (name == "mean") return Pooling::kMean;
  if (name == "max") return Pooling::kMax;
  throw std::invalid_argument("unknown pooling '" + std::string(name) + "'");
}

Tensor deepset_pool(const Dense& phi, const Tensor& entities, Pooling pooling) {
  if (entities.rank() != 3 || entities.dim(2) != phi.in_features()) {
    throw DimensionError("deepset_pool: entity rows " + shape_to_string(entities.shape()) +
                         " do not have feature width " + std::to_string(phi.in_features()));
  }
  const std::size_t n = entities.dim(0);
  const std::size_t m = entities.dim(1);
  const std::size_t h = phi.out_features();
  if (m == 0) return Tensor::zeros({n, h});
  const Tensor embedded =
      reshape(phi.forward(reshape(entities, {n * m, phi.in_features()})), {n, m, h});
  switch (pooling) {
    case Pooling::kSum:
      return set_sum(embedded, 1);
    case Pooling::kMean:
      return scale(set_sum(embedded, 1), 1.0 / static_cast<double>(m));
    case Pooling::kMax:
      return max(embedded, 1);
  }
  throw std::logic_error("deepset_pool: bad pooling");
}

DeepSetAgentNetwork::DeepSetAgentNetwork(const ObsLayout& layout, const DeepSetConfig& config,
                                         Rng& rng)
    : AgentNetwork(layout), config_(config) {
  const std::size_t h = config.embed_dim;
  own_dense_ = Dense(layout.own_dim, h, rng);
  ally_phi_ = Dense(layout.entity_dim, h, rng, false);
  enemy_phi_ = Dense(layout.entity_dim, h, rng, false);
  trunk_ = Dense(h, h, rng);
  move_head_ = Dense(h, layout.move_actions, rng);
  attack_head_ = Dense(h, layout.enemy_rows, rng);
}

void DeepSetAgentNetwork::collect_parameters(const std::string& prefix,
                                             std::vector<NamedParameter>& out) const {
  own_dense_.collect_parameters(prefix + "own.", out);
  ally_phi_.collect_parameters(prefix + "ally_phi.", out);
  enemy_phi_.collect_parameters(prefix + "enemy_phi.", out);
  trunk_.collect_parameters(prefix + "trunk.", out);
  move_head_.collect_parameters(prefix + "move_head.", out);
  attack_head_.collect_parameters(prefix + "attack_head.", out);
}

Tensor DeepSetAgentNetwork::hidden(const Tensor& obs) const {
  Tensor embedding = own_dense_.forward(own_features(obs));
  embedding = add(embedding, deepset_pool(ally_phi_, ally_rows(obs), config_.pooling));
  embedding = add(embedding, deepset_pool(enemy_phi_, enemy_rows(obs), config_.pooling));
  return relu(trunk_.forward(relu(embedding)));
}

Tensor DeepSetAgentNetwork::forward_unmasked(const Tensor& obs, ForwardContext&) const {
  const Tensor h = hidden(obs);
  const Tensor parts[] = {move_head_.forward(h), attack_head_.forward(h)};
  return concat(parts, 1);
}

HpnSetAgentNetwork::HpnSetAgentNetwork(const ObsLayout& layout, const DeepSetConfig& set_config,
                                       const HpnConfig& hpn_config, Rng& rng)
    : AgentNetwork(layout), config_(set_config) {
  const std::size_t h = set_config.embed_dim;
  own_dense_ = Dense(layout.own_dim, h, rng);
  ally_phi_ = Dense(layout.entity_dim, h, rng, false);
  enemy_phi_ = Dense(layout.entity_dim, h, rng, false);
  trunk_ = Dense(h, h, rng);
  move_head_ = Dense(h, layout.move_actions, rng);
  attack_head_ = HyperLayer(HyperLayer::Mode::kOutput, layout.entity_dim, h,
                            hpn_config.hyper_hidden_dim, hpn_config.hyper_layer_num, rng);
}

void HpnSetAgentNetwork::collect_parameters(const std::string& prefix,
                                            std::vector<NamedParameter>& out) const {
  own_dense_.collect_parameters(prefix + "own.", out);
  ally_phi_.collect_parameters(prefix + "ally_phi.", out);
  enemy_phi_.collect_parameters(prefix + "enemy_phi.", out);
  trunk_.collect_parameters(prefix + "trunk.", out);
  move_head_.collect_parameters(prefix + "move_head.", out);
  attack_head_.collect_parameters(prefix + "attack_head.", out);
}

Tensor HpnSetAgentNetwork::forward_unmasked(const Tensor& obs, ForwardContext&) const {
  const Tensor enemies = enemy_rows(obs);
  Tensor embedding = own_dense_.forward(own_features(obs));
  embedding = add(embedding, deepset_pool(ally_phi_, ally_rows(obs), config_.pooling));
  embedding = add(embedding, deepset_pool(enemy_phi_, enemies, config_.pooling));
  const Tensor h = relu(trunk_.forward(relu(embedding)));
  const Tensor parts[] = {move_head_.forward(h), hpn_output_layer(attack_head_, h, enemies)};
  return concat(parts, 1);
}

}  // namespace permnet
