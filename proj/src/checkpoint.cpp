#include "permnet/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace permnet {

namespace {

constexpr char kMagic[4] = {'P', 'N', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof value)) {
    throw std::runtime_error("checkpoint: truncated file");
  }
  return value;
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), n)) throw std::runtime_error("checkpoint: truncated file");
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::string& config_text,
                     const std::vector<NamedParameter>& parameters) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path.string());
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(config_text.size()));
  out.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(parameters.size()));
  for (const auto& p : parameters) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.tensor.rank()));
    for (std::size_t d : p.tensor.shape()) put<std::uint64_t>(out, d);
    const auto values = p.tensor.data();
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot read " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.config_text = get_string(in);
  const auto count = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = get_string(in);
    const auto rank = get<std::uint32_t>(in);
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(get<std::uint64_t>(in));
    std::vector<double> values(shape_numel(shape));
    if (!values.empty() &&
        !in.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(double)))) {
      throw std::runtime_error("checkpoint: truncated file");
    }
    ck.parameters.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return ck;
}

void restore_parameters(const Checkpoint& checkpoint, std::vector<NamedParameter>& parameters) {
  for (auto& p : parameters) {
    const Tensor* found = nullptr;
    for (const auto& [name, tensor] : checkpoint.parameters) {
      if (name == p.name) found = &tensor;
    }
    if (found == nullptr) throw std::runtime_error("checkpoint: missing parameter " + p.name);
    if (found->shape() != p.tensor.shape()) {
      throw std::runtime_error("checkpoint: parameter " + p.name + " has shape " +
                               shape_to_string(found->shape()) + ", expected " +
                               shape_to_string(p.tensor.shape()));
    }
    const auto src = found->data();
    auto dst = p.tensor.mutable_data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

}  // namespace permnet
