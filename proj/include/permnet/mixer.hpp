#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string_view>

#include "permnet/module.hpp"

namespace permnet {

enum class MixerKind { kVdn, kQmix };

MixerKind parse_mixer(std::string_view name);  // throws UnknownNameError
std::string_view mixer_name(MixerKind kind);

// Combines chosen-action agent values (B, n_agents) and states
// (B, state_dim) into team values (B).
class Mixer : public Module {
 public:
  virtual Tensor forward(const Tensor& agent_q, const Tensor& states) const = 0;
  virtual MixerKind kind() const = 0;
};

class VdnMixer : public Mixer {
 public:
  Tensor forward(const Tensor& agent_q, const Tensor& states) const override;
  MixerKind kind() const override { return MixerKind::kVdn; }
  void collect_parameters(const std::string&, std::vector<NamedParameter>&) const override {}
};

struct QmixConfig {
  std::size_t mixing_embed_dim = 32;
  std::size_t hypernet_embed = 64;
};

// Monotonic mixer:
//   hidden = elu(q |W1(s)| + b1(s)),  Q_tot = hidden |w2(s)| + V(s)
// W1 and w2 come from two-layer state hypernetworks, b1 from a dense layer
// and V from a two-layer network.
class QmixMixer : public Mixer {
 public:
  QmixMixer(std::size_t n_agents, std::size_t state_dim, const QmixConfig& config, Rng& rng);

  Tensor forward(const Tensor& agent_q, const Tensor& states) const override;
  MixerKind kind() const override { return MixerKind::kQmix; }
  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParameter>& out) const override;

  std::size_t n_agents() const { return n_agents_; }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t embed_dim() const { return config_.mixing_embed_dim; }

  Mlp& hyper_w1() { return hyper_w1_; }
  Dense& hyper_b1() { return hyper_b1_; }
  Mlp& hyper_w2() { return hyper_w2_; }
  Mlp& value() { return value_; }

 private:
  std::size_t n_agents_;
  std::size_t state_dim_;
  QmixConfig config_;
  Mlp hyper_w1_;
  Dense hyper_b1_;
  Mlp hyper_w2_;
  Mlp value_;
};

std::unique_ptr<Mixer> make_mixer(MixerKind kind, std::size_t n_agents, std::size_t state_dim,
                                  const QmixConfig& config, Rng& rng);

// Single-sample conveniences.
double vdn_mix(std::span<const double> agent_q);
double qmix_mix(const QmixMixer& mixer, std::span<const double> agent_q,
                std::span<const double> state);

}  // namespace permnet
