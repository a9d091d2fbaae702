#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "permnet/optim.hpp"

namespace permnet {

// Binary layout, all integers little-endian:
//   magic "PNCK" | u32 version (1) | u32 config length | config text
//   | u32 parameter count | per parameter:
//       u32 name length | name | u32 rank | u64 dims[rank] | f64 values
struct Checkpoint {
  std::string config_text;
  std::vector<std::pair<std::string, Tensor>> parameters;
};

void save_checkpoint(const std::filesystem::path& path, const std::string& config_text,
                     const std::vector<NamedParameter>& parameters);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies checkpointed values into `parameters` by name; every parameter must
// be present with a matching shape.
void restore_parameters(const Checkpoint& checkpoint, std::vector<NamedParameter>& parameters);

}  // namespace permnet
