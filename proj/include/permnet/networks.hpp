#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "permnet/agent_network.hpp"
#include "permnet/baselines.hpp"
#include "permnet/dpn.hpp"
#include "permnet/hpn.hpp"

namespace permnet {

enum class Architecture { kHpn, kDpn, kConcat, kBigConcat, kDeepSet, kHpnSet };

// Thrown for names outside a closed set; token() is the offending name.
class UnknownNameError : public std::invalid_argument {
 public:
  UnknownNameError(std::string what_kind, std::string token)
      : std::invalid_argument("unknown " + what_kind + " '" + token + "'"),
        token_(std::move(token)) {}
  const std::string& token() const { return token_; }

 private:
  std::string token_;
};

Architecture parse_architecture(std::string_view name);
std::string_view architecture_name(Architecture arch);
std::vector<Architecture> all_architectures();

struct NetworkConfig {
  HpnConfig hpn;
  DpnConfig dpn;
  DeepSetConfig deepset;
  std::size_t concat_hidden = 64;
};

std::unique_ptr<AgentNetwork> make_agent_network(Architecture arch, const ObsLayout& layout,
                                                 const NetworkConfig& config, Rng& rng);

}  // namespace permnet
