#include "permnet/dpn.hpp"

#include <vector>

#include "permnet/ops.hpp"

namespace permnet {

bool is_permutation_matrix(std::span<const double> entries, std::size_t rows, std::size_t cols) {
  if (entries.size() != rows * cols || rows != cols) return false;
  std::vector<int> col_count(cols, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    int row_count = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = entries[r * cols + c];
      if (v == 1.0) {
        ++row_count;
        ++col_count[c];
      } else if (v != 0.0) {
        return false;
      }
    }
    if (row_count != 1) return false;
  }
  for (int c : col_count) {
    if (c != 1) return false;
  }
  return true;
}

DpnNet::DpnNet(std::size_t entity_dim, std::size_t width, std::size_t hidden_dim,
               GumbelConfig gumbel, Rng& rng)
    : width_(width), assign_mlp_({entity_dim, hidden_dim, width}, rng), gumbel_(gumbel) {
  gumbel_.validate();
}

void DpnNet::collect_parameters(const std::string& prefix, std::vector<NamedParameter>& out) const {
  assign_mlp_.collect_parameters(prefix + "assign.", out);
}

Tensor assign_rows(const Tensor& slot_logits, const GumbelConfig& gumbel, Rng* rng) {
  const bool batched = slot_logits.rank() == 3;
  if (!batched && slot_logits.rank() != 2) {
    throw DimensionError("assign_rows: expected (m', m) or (N, m', m) logits, got " +
                         shape_to_string(slot_logits.shape()));
  }
  const Tensor logits = batched ? slot_logits
                                : reshape(slot_logits, {1, slot_logits.dim(0), slot_logits.dim(1)});
  const std::size_t n = logits.dim(0);
  const std::size_t slots = logits.dim(1);
  const std::size_t m = logits.dim(2);
  if (slots != m) {
    throw DimensionError("assign_rows: " + std::to_string(slots) + " slots for " +
                         std::to_string(m) + " entities");
  }
  GumbelConfig hard = gumbel;
  hard.hard = true;

  std::vector<double> invalid(n * m, 0.0);
  std::vector<Tensor> rows;
  rows.reserve(slots);
  for (std::size_t d = 0; d < slots; ++d) {
    const Tensor logit = reshape(narrow(logits, 1, d, 1), {n, m});
    std::vector<double> negative(invalid.size());
    for (std::size_t i = 0; i < invalid.size(); ++i) negative[i] = invalid[i] * kAssignedMask;
    const Tensor masked = add(logit, Tensor({n, m}, std::move(negative)));
    const Tensor assign = gumbel_softmax(masked, hard, rng);
    const auto av = assign.data();
    for (std::size_t i = 0; i < invalid.size(); ++i) invalid[i] += av[i];
    rows.push_back(reshape(assign, {n, 1, m}));
  }
  const Tensor matrix = concat(rows, 1);
  return batched ? matrix : reshape(matrix, {slots, m});
}

Tensor generate_permutation_matrix(const DpnNet& net, const Tensor& entities, bool deterministic,
                                   Rng* rng) {
  const bool batched = entities.rank() == 3;
  if (!(batched || entities.rank() == 2) || entities.shape().back() != net.entity_dim()) {
    throw DimensionError("generate_permutation_matrix: entity rows " +
                         shape_to_string(entities.shape()) + " do not have feature width " +
                         std::to_string(net.entity_dim()));
  }
  const std::size_t n = batched ? entities.dim(0) : 1;
  const std::size_t m = batched ? entities.dim(1) : entities.dim(0);
  if (m != net.width()) {
    throw DimensionError("generate_permutation_matrix: group of " + std::to_string(m) +
                         " entities for a net of width " + std::to_string(net.width()));
  }
  const Tensor logits = net.assign_mlp().forward(reshape(entities, {n * m, net.entity_dim()}));
  const Tensor slot_major = transpose(reshape(logits, {n, m, net.width()}));
  GumbelConfig config = net.gumbel();
  config.deterministic = deterministic;
  const Tensor matrix = assign_rows(slot_major, config, rng);
  return batched ? matrix : reshape(matrix, {m, m});
}

Tensor dpn_forward(const DpnNet& net, const Tensor& entities,
                   const std::function<Tensor(const Tensor&)>& downstream,
                   std::optional<EquivariantSlice> equivariant, bool deterministic, Rng* rng) {
  if (entities.rank() != 2) {
    throw DimensionError("dpn_forward: expected (m, k) entities, got " +
                         shape_to_string(entities.shape()));
  }
  const std::size_t m = entities.dim(0);
  const Tensor matrix = generate_permutation_matrix(net, entities, deterministic, rng);
  const Tensor canonical = matmul(matrix, entities);
  const Tensor out = downstream(canonical);
  if (!equivariant) return out;
  if (out.rank() != 2) {
    throw DimensionError("dpn_forward: downstream output must be 2-D, got " +
                         shape_to_string(out.shape()));
  }
  if (equivariant->length != m || equivariant->start + m > out.dim(0)) {
    throw DimensionError("dpn_forward: equivariant slice of length " +
                         std::to_string(equivariant->length) + " at " +
                         std::to_string(equivariant->start) + " does not fit " + std::to_string(m) +
                         " entities in output " + shape_to_string(out.shape()));
  }
  const std::size_t rows = out.dim(0);
  const std::size_t start = equivariant->start;
  std::vector<Tensor> parts;
  if (start > 0) parts.push_back(narrow(out, 0, 0, start));
  parts.push_back(matmul(transpose(matrix), narrow(out, 0, start, m)));
  if (start + m < rows) parts.push_back(narrow(out, 0, start + m, rows - start - m));
  return concat(parts, 0);
}

DpnAgentNetwork::DpnAgentNetwork(const ObsLayout& layout, const DpnConfig& config, Rng& rng)
    : AgentNetwork(layout) {
  GumbelConfig gumbel;
  gumbel.tau = config.tau;
  gumbel.hard = true;
  ally_net_ = DpnNet(layout.entity_dim, layout.ally_rows, config.permutation_net_dim, gumbel, rng);
  enemy_net_ = DpnNet(layout.entity_dim, layout.enemy_rows, config.permutation_net_dim, gumbel, rng);
  downstream_ = Mlp({layout.obs_dim(), config.hidden_dim, config.hidden_dim, layout.n_actions()}, rng);
}

void DpnAgentNetwork::collect_parameters(const std::string& prefix,
                                         std::vector<NamedParameter>& out) const {
  ally_net_.collect_parameters(prefix + "ally_perm.", out);
  enemy_net_.collect_parameters(prefix + "enemy_perm.", out);
  downstream_.collect_parameters(prefix + "downstream.", out);
}

Tensor DpnAgentNetwork::forward_unmasked(const Tensor& obs, ForwardContext& ctx) const {
  const ObsLayout& l = layout();
  const std::size_t n = obs.dim(0);
  if (!ctx.deterministic && ctx.rng == nullptr) {
    throw std::invalid_argument("dpn: noisy forward needs a random stream");
  }
  std::vector<Tensor> inputs{own_features(obs)};
  if (l.ally_rows > 0) {
    const Tensor allies = ally_rows(obs);
    const Tensor m1 = generate_permutation_matrix(ally_net_, allies, ctx.deterministic, ctx.rng);
    inputs.push_back(reshape(bmm(m1, allies), {n, l.ally_rows * l.entity_dim}));
  }
  Tensor m2;
  if (l.enemy_rows > 0) {
    const Tensor enemies = enemy_rows(obs);
    m2 = generate_permutation_matrix(enemy_net_, enemies, ctx.deterministic, ctx.rng);
    inputs.push_back(reshape(bmm(m2, enemies), {n, l.enemy_rows * l.entity_dim}));
  }
  const Tensor q = downstream_.forward(concat(inputs, 1));
  if (l.enemy_rows == 0) return q;

  const Tensor move_q = narrow(q, 1, 0, l.move_actions);
  const Tensor canonical_attack = reshape(narrow(q, 1, l.move_actions, l.enemy_rows),
                                          {n, l.enemy_rows, 1});
  const Tensor attack_q = reshape(bmm(transpose(m2), canonical_attack), {n, l.enemy_rows});
  const Tensor parts[] = {move_q, attack_q};
  return concat(parts, 1);
}

}  // namespace permnet
