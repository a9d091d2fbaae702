#include "permnet/networks.hpp"

namespace permnet {

namespace {

constexpr std::pair<Architecture, std::string_view> kNames[] = {
    {Architecture::kHpn, "hpn"},         {Architecture::kDpn, "dpn"},
    {Architecture::kConcat, "concat"},   {Architecture::kBigConcat, "big_concat"},
    {Architecture::kDeepSet, "deepset"}, {Architecture::kHpnSet, "hpn_set"},
};

}  // namespace

Architecture parse_architecture(std::string_view name) {
  for (const auto& [arch, text] : kNames) {
    if (text == name) return arch;
  }
  throw UnknownNameError("architecture", std::string(name));
}

std::string_view architecture_name(Architecture arch) {
  for (const auto& [a, text] : kNames) {
    if (a == arch) return text;
  }
  return "?";
}

std::vector<Architecture> all_architectures() {
  std::vector<Architecture> out;
  for (const auto& entry : kNames) out.push_back(entry.first);
  return out;
}

std::unique_ptr<AgentNetwork> make_agent_network(Architecture arch, const ObsLayout& layout,
                                                 const NetworkConfig& config, Rng& rng) {
  switch (arch) {
    case Architecture::kHpn:
      return std::make_unique<HpnAgentNetwork>(layout, config.hpn, rng);
    case Architecture::kDpn:
      return std::make_unique<DpnAgentNetwork>(layout, config.dpn, rng);
    case Architecture::kConcat:
      return std::make_unique<ConcatAgentNetwork>(
          layout, std::vector<std::size_t>{config.concat_hidden, config.concat_hidden}, rng);
    case Architecture::kBigConcat:
      return std::make_unique<BigConcatAgentNetwork>(layout, config.hpn, rng);
    case Architecture::kDeepSet:
      return std::make_unique<DeepSetAgentNetwork>(layout, config.deepset, rng);
    case Architecture::kHpnSet:
      return std::make_unique<HpnSetAgentNetwork>(layout, config.deepset, config.hpn, rng);
  }
  throw std::logic_error("make_agent_network: bad architecture");
}

}  // namespace permnet
