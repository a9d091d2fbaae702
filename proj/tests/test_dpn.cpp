#include <doctest.h>

#include "permnet/dpn.hpp"
#include "permnet/grad_check.hpp"
#include "permnet/ops.hpp"
#include "test_util.hpp"

using namespace permnet;
using namespace permnet::testing;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

// Net whose assignment logits equal its (non-negative) input: identity
// weights and zero biases on both layers of a 2 -> 2 -> 2 MLP.
DpnNet passthrough_net() {
  Rng rng(0);
  DpnNet net(2, 2, 2, GumbelConfig{}, rng);
  for (const Dense& layer : net.assign_mlp().layers()) {
    Tensor w = layer.weight();
    Tensor b = layer.bias();
    auto wd = w.mutable_data();
    wd[0] = 1.0;
    wd[1] = 0.0;
    wd[2] = 0.0;
    wd[3] = 1.0;
    for (double& x : b.mutable_data()) x = 0.0;
  }
  return net;
}

Tensor take(const Tensor& rows, const std::vector<std::size_t>& perm) { return take_rows(rows, perm); }

}  // namespace

TEST_CASE("is_permutation_matrix") {
  CHECK(is_permutation_matrix(std::vector<double>{0, 1, 1, 0}, 2, 2));
  CHECK_FALSE(is_permutation_matrix(std::vector<double>{1, 1, 0, 0}, 2, 2));
  CHECK_FALSE(is_permutation_matrix(std::vector<double>{1, 0, 0, 0.5}, 2, 2));
  CHECK_FALSE(is_permutation_matrix(std::vector<double>{1, 0, 0, 1}, 2, 3));
}

TEST_CASE("assign_rows hand traces") {
  const GumbelConfig det{0.5, true, true};
  CHECK(values(assign_rows(Tensor({2, 2}, {2, 1, 0.5, 3}), det, nullptr)) ==
        std::vector<double>{1, 0, 0, 1});
  CHECK(values(assign_rows(Tensor({2, 2}, {1, 2, 3, 0.5}), det, nullptr)) ==
        std::vector<double>{0, 1, 1, 0});
  // Row 1 prefers column 0 but it was taken by row 0.
  CHECK(values(assign_rows(Tensor({2, 2}, {5, 1, 9, 2}), det, nullptr)) ==
        std::vector<double>{1, 0, 0, 1});
}

TEST_CASE("generate_permutation_matrix canonicalises a swapped pair") {
  const DpnNet net = passthrough_net();
  // Logits L = X, slot-major L^T = [[2,1],[0.5,3]].
  const Tensor x({2, 2}, {2, 0.5, 1, 3});
  const Tensor m = generate_permutation_matrix(net, x, true, nullptr);
  CHECK(values(m) == std::vector<double>{1, 0, 0, 1});

  const Tensor swapped = take(x, {1, 0});
  const Tensor ms = generate_permutation_matrix(net, swapped, true, nullptr);
  CHECK(values(ms) == std::vector<double>{0, 1, 1, 0});
  CHECK(values(matmul(ms, swapped)) == values(matmul(m, x)));
}

TEST_CASE("generate_permutation_matrix rejects size mismatches") {
  Rng rng(1);
  const DpnNet net(4, 3, 8, GumbelConfig{}, rng);
  CHECK_THROWS_AS(generate_permutation_matrix(net, Tensor::zeros({2, 4}), true, nullptr),
                  DimensionError);
  CHECK_THROWS(generate_permutation_matrix(net, Tensor::zeros({3, 4}), false, nullptr));
}

TEST_CASE("canonicalisation is invariant to all orderings of a set") {
  Rng rng(42);
  const auto perms = all_permutations(4);
  for (int trial = 0; trial < 100; ++trial) {
    const DpnNet net(4, 4, 8, GumbelConfig{}, rng);
    const Tensor x = random_tensor({4, 4}, rng);
    const auto reference = values(matmul(generate_permutation_matrix(net, x, true, nullptr), x));
    for (const auto& p : perms) {
      const Tensor xp = take(x, p);
      const Tensor m = generate_permutation_matrix(net, xp, true, nullptr);
      REQUIRE(values(matmul(m, xp)) == reference);
    }
  }
}

TEST_CASE("generated matrices are valid permutations in both modes") {
  Rng rng(7);
  const DpnNet net(4, 4, 8, GumbelConfig{}, rng);
  for (int i = 0; i < 2000; ++i) {
    const Tensor x = random_tensor({4, 4}, rng, -3, 3);
    CHECK(is_permutation_matrix(generate_permutation_matrix(net, x, false, &rng).data(), 4, 4));
    CHECK(is_permutation_matrix(generate_permutation_matrix(net, x, true, nullptr).data(), 4, 4));
  }
}

TEST_CASE("dpn_forward with identity downstream restores the input") {
  Rng rng(5);
  const DpnNet net(3, 3, 8, GumbelConfig{}, rng);
  const Tensor x = random_tensor({3, 3}, rng);
  for (const auto& p : all_permutations(3)) {
    const Tensor xp = take(x, p);
    for (bool det : {true, false}) {
      const Tensor y = dpn_forward(
          net, xp, [](const Tensor& t) { return t; }, EquivariantSlice{0, 3}, det, &rng);
      CHECK(values(y) == values(xp));
    }
  }
}

TEST_CASE("dpn agent network: 2 allies x 3 enemies, all 12 joint orderings") {
  const ObsLayout layout{};
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const DpnAgentNetwork net(layout, DpnConfig{}, rng);
    const auto obs = random_observation(layout, rng);
    const Tensor q0 = net.forward(Tensor({1, layout.obs_dim()}, obs));
    for (const auto& ap : all_permutations(2)) {
      for (const auto& ep : all_permutations(3)) {
        const auto po = permute_observation(obs, layout, ap, ep);
        const Tensor q = net.forward(Tensor({1, layout.obs_dim()}, po));
        for (std::size_t a = 0; a < layout.move_actions; ++a) REQUIRE(q.data()[a] == q0.data()[a]);
        for (std::size_t j = 0; j < 3; ++j) {
          REQUIRE(q.data()[layout.move_actions + j] == q0.data()[layout.move_actions + ep[j]]);
        }
      }
    }
  }
}

TEST_CASE("dpn assignment parameters receive gradient through straight-through") {
  const ObsLayout layout{};
  Rng rng(12);
  const DpnAgentNetwork net(layout, DpnConfig{}, rng);
  std::vector<double> two = random_observation(layout, rng);
  const auto other = random_observation(layout, rng);
  two.insert(two.end(), other.begin(), other.end());
  Rng noise(3);
  sum_all(square(net.forward(Tensor({2, layout.obs_dim()}, two), {false, &noise}))).backward();
  double total = 0.0;
  for (const auto& p : net.parameters()) {
    if (p.name.rfind("ally_perm.", 0) != 0 && p.name.rfind("enemy_perm.", 0) != 0) continue;
    for (double g : p.tensor.grad()) total += std::abs(g);
  }
  CHECK(total > 0.0);
}

// The hard assignment is piecewise constant, so finite differences only see
// the downstream network; the assignment path is covered by the
// straight-through equality test.
TEST_CASE("dpn agent network passes grad_check on its downstream parameters") {
  const ObsLayout layout{};
  Rng rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const DpnAgentNetwork net(layout, DpnConfig{}, rng);
    const Tensor obs({1, layout.obs_dim()}, random_observation(layout, rng));
    auto params = net.parameters();
    std::vector<Tensor> inputs;
    for (const auto& p : params) {
      if (p.name.rfind("downstream.", 0) == 0) inputs.push_back(p.tensor);
    }
    const double err = grad_check(
        [&](std::span<const Tensor>) { return sum_all(square(net.forward(obs))); }, inputs);
    CHECK(err < 1e-4);
  }
}
