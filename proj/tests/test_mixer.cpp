#include <doctest.h>

#include "permnet/grad_check.hpp"
#include "permnet/mixer.hpp"
#include "permnet/networks.hpp"
#include "permnet/ops.hpp"
#include "test_util.hpp"

using namespace permnet;
using namespace permnet::testing;

namespace {

void force_constant(Mlp& mlp, double value) {
  Dense& last = mlp.layers().back();
  Tensor w = last.weight();
  Tensor b = last.bias();
  for (double& x : w.mutable_data()) x = 0.0;
  for (double& x : b.mutable_data()) x = value;
}

}  // namespace

TEST_CASE("vdn examples") {
  CHECK(vdn_mix(std::vector<double>{1.0, 2.0, 3.0}) == 6.0);
  CHECK(vdn_mix(std::vector<double>{0.0, 0.0}) == 0.0);
  CHECK(vdn_mix(std::vector<double>{3.0, 1.0, 2.0}) == vdn_mix(std::vector<double>{1.0, 2.0, 3.0}));
  CHECK_THROWS(vdn_mix(std::vector<double>{}));
  const Tensor q({2, 3}, {1, 2, 3, -1, 0, 4});
  const Tensor tot = VdnMixer{}.forward(q, Tensor::zeros({2, 5}));
  CHECK(tot.data()[0] == 6.0);
  CHECK(tot.data()[1] == 3.0);
}

TEST_CASE("qmix is monotone in every agent value") {
  Rng rng(1);
  const QmixMixer mixer(3, 24, QmixConfig{}, rng);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> q(3);
    for (double& v : q) v = rng.uniform(-5, 5);
    std::vector<double> s(24);
    for (double& v : s) v = rng.uniform(-1, 1);
    const double base = qmix_mix(mixer, q, s);
    for (std::size_t i = 0; i < 3; ++i) {
      auto bumped = q;
      bumped[i] += 1e-3;
      CHECK(qmix_mix(mixer, bumped, s) >= base);
    }
  }
}

TEST_CASE("qmix with unit mixing weights and embed 1 degenerates to vdn") {
  Rng rng(2);
  QmixMixer mixer(3, 6, QmixConfig{1, 8}, rng);
  force_constant(mixer.hyper_w1(), 1.0);
  force_constant(mixer.hyper_w2(), 1.0);
  force_constant(mixer.value(), 0.0);
  Tensor w = mixer.hyper_b1().weight();
  Tensor b = mixer.hyper_b1().bias();
  for (double& x : w.mutable_data()) x = 0.0;
  for (double& x : b.mutable_data()) x = 0.0;
  // elu is the identity on non-negative sums.
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> q(3);
    for (double& v : q) v = rng.uniform(0, 5);
    std::vector<double> s(6);
    for (double& v : s) v = rng.uniform(-1, 1);
    CHECK(qmix_mix(mixer, q, s) == doctest::Approx(q[0] + q[1] + q[2]).epsilon(1e-14));
  }
}

TEST_CASE("qmix rejects a state of the wrong width") {
  Rng rng(3);
  const QmixMixer mixer(3, 24, QmixConfig{}, rng);
  CHECK_THROWS(qmix_mix(mixer, std::vector<double>{1, 2, 3}, std::vector<double>(5)));
}

TEST_CASE("qmix passes grad_check") {
  Rng rng(4);
  const QmixMixer mixer(3, 12, QmixConfig{8, 16}, rng);
  std::vector<Tensor> inputs{random_tensor({4, 3}, rng), random_tensor({4, 12}, rng)};
  for (const auto& p : mixer.parameters()) inputs.push_back(p.tensor);
  CHECK(grad_check(
            [&](std::span<const Tensor> x) { return sum_all(square(mixer.forward(x[0], x[1]))); },
            inputs) < 1e-4);
}

TEST_CASE("mixer names") {
  CHECK(parse_mixer("vdn") == MixerKind::kVdn);
  CHECK(parse_mixer("qmix") == MixerKind::kQmix);
  CHECK(mixer_name(MixerKind::kQmix) == "qmix");
  CHECK_THROWS_AS(parse_mixer("sum"), UnknownNameError);
}
