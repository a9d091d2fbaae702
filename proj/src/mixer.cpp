#include "permnet/mixer.hpp"

#include <stdexcept>
#include <string>

#include "permnet/networks.hpp"
#include "permnet/ops.hpp"

namespace permnet {

MixerKind parse_mixer(std::string_view name) {
  if (name == "vdn") return MixerKind::kVdn;
  if (name == "qmix") return MixerKind::kQmix;
  throw UnknownNameError("mixer", std::string(name));
}

std::string_view mixer_name(MixerKind kind) { return kind == MixerKind::kVdn ? "vdn" : "qmix"; }

Tensor VdnMixer::forward(const Tensor& agent_q, const Tensor&) const {
  if (agent_q.rank() != 2 || agent_q.dim(1) == 0) {
    throw DimensionError("vdn: expected (B, n_agents) values, got " +
                         shape_to_string(agent_q.shape()));
  }
  return sum(agent_q, 1);
}

QmixMixer::QmixMixer(std::size_t n_agents, std::size_t state_dim, const QmixConfig& config,
                     Rng& rng)
    : n_agents_(n_agents), state_dim_(state_dim), config_(config) {
  const std::size_t e = config.mixing_embed_dim;
  const std::size_t hyper = config.hypernet_embed;
  hyper_w1_ = Mlp({state_dim, hyper, n_agents * e}, rng);
  hyper_b1_ = Dense(state_dim, e, rng);
  hyper_w2_ = Mlp({state_dim, hyper, e}, rng);
  value_ = Mlp({state_dim, e, 1}, rng);
}

void QmixMixer::collect_parameters(const std::string& prefix,
                                   std::vector<NamedParameter>& out) const {
  hyper_w1_.collect_parameters(prefix + "hyper_w1.", out);
  hyper_b1_.collect_parameters(prefix + "hyper_b1.", out);
  hyper_w2_.collect_parameters(prefix + "hyper_w2.", out);
  value_.collect_parameters(prefix + "value.", out);
}

Tensor QmixMixer::forward(const Tensor& agent_q, const Tensor& states) const {
  if (agent_q.rank() != 2 || agent_q.dim(1) != n_agents_) {
    throw DimensionError("qmix: expected (B, " + std::to_string(n_agents_) + ") values, got " +
                         shape_to_string(agent_q.shape()));
  }
  if (states.rank() != 2 || states.dim(0) != agent_q.dim(0) || states.dim(1) != state_dim_) {
    throw DimensionError("qmix: state batch " + shape_to_string(states.shape()) +
                         " does not match width " + std::to_string(state_dim_));
  }
  const std::size_t b = agent_q.dim(0);
  const std::size_t e = config_.mixing_embed_dim;
  const Tensor w1 = reshape(abs(hyper_w1_.forward(states)), {b, n_agents_, e});
  const Tensor b1 = reshape(hyper_b1_.forward(states), {b, 1, e});
  const Tensor hidden = elu(add(bmm(reshape(agent_q, {b, 1, n_agents_}), w1), b1));
  const Tensor w2 = reshape(abs(hyper_w2_.forward(states)), {b, e, 1});
  const Tensor v = reshape(value_.forward(states), {b});
  return add(reshape(bmm(hidden, w2), {b}), v);
}

std::unique_ptr<Mixer> make_mixer(MixerKind kind, std::size_t n_agents, std::size_t state_dim,
                                  const QmixConfig& config, Rng& rng) {
  if (kind == MixerKind::kVdn) return std::make_unique<VdnMixer>();
  return std::make_unique<QmixMixer>(n_agents, state_dim, config, rng);
}

double vdn_mix(std::span<const double> agent_q) {
  if (agent_q.empty()) throw std::invalid_argument("vdn_mix: no agent values");
  double total = 0.0;
  for (double q : agent_q) total += q;
  return total;
}

double qmix_mix(const QmixMixer& mixer, std::span<const double> agent_q,
                std::span<const double> state) {
  NoGradGuard no_grad;
  const Tensor q({1, agent_q.size()}, std::vector<double>(agent_q.begin(), agent_q.end()));
  const Tensor s({1, state.size()}, std::vector<double>(state.begin(), state.end()));
  return mixer.forward(q, s).item();
}

}  // namespace permnet
