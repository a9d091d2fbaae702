#include <doctest.h>

#include <cmath>

#include "permnet/grad_check.hpp"
#include "permnet/module.hpp"
#include "permnet/ops.hpp"
#include "permnet/optim.hpp"
#include "test_util.hpp"

using namespace permnet;
using permnet::testing::random_tensor;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_CASE("matmul examples") {
  const Tensor id({2, 2}, {1, 0, 0, 1});
  const Tensor col({2, 1}, {3, 4});
  CHECK(values(matmul(id, col)) == std::vector<double>{3, 4});
  CHECK(matmul(Tensor({1, 2}, {1, 2}), col).item() == 11.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL("expected a dimension error");
  } catch (const DimensionError& e) {
    const std::string what = e.what();
    CHECK(what.find("(2,3)") != std::string::npos);
  }
}

TEST_CASE("matmul gradients match central differences") {
  Rng rng(3);
  std::vector<Tensor> in{random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)};
  const double err = grad_check(
      [](std::span<const Tensor> x) { return sum_all(square(matmul(x[0], x[1]))); }, in);
  CHECK(err < 1e-4);
}

TEST_CASE("elementwise examples") {
  CHECK(values(relu(Tensor({2}, {-1, 2}))) == std::vector<double>{0, 2});
  CHECK(values(abs(Tensor({2}, {-3, 3}))) == std::vector<double>{3, 3});
  Tensor x = Tensor::scalar(0.0, true);
  tanh(x).backward();
  CHECK(x.grad()[0] == 1.0);

  Tensor z({1}, {0.0}, true);
  relu(z).backward();
  CHECK(z.grad()[0] == 0.0);

  CHECK_THROWS_AS(add(Tensor::zeros({2, 3}), Tensor::zeros({2})), DimensionError);
  // Leading-axis broadcasting.
  CHECK(values(add(Tensor({2, 2}, {1, 2, 3, 4}), Tensor({2}, {10, 20}))) ==
        std::vector<double>{11, 22, 13, 24});
}

TEST_CASE("elementwise dispatcher") {
  const Tensor a({2}, {1, -2});
  const Tensor b({2}, {3, 4});
  const Tensor pair[] = {a, b};
  const Tensor one[] = {a};
  CHECK(values(elementwise(ElementwiseKind::kAdd, pair)) == std::vector<double>{4, 2});
  CHECK(values(elementwise(ElementwiseKind::kMul, pair)) == std::vector<double>{3, -8});
  CHECK(values(elementwise(ElementwiseKind::kNeg, one)) == std::vector<double>{-1, 2});
  CHECK(values(elementwise(ElementwiseKind::kAbs, one)) == std::vector<double>{1, 2});
  CHECK_THROWS(elementwise(ElementwiseKind::kAdd, one));
}

TEST_CASE("every differentiable op passes grad_check") {
  Rng rng(11);
  using Fn = Tensor (*)(std::span<const Tensor>);
  const std::vector<std::pair<const char*, Fn>> unary_ops = {
      {"tanh", [](std::span<const Tensor> x) { return sum_all(tanh(x[0])); }},
      {"exp", [](std::span<const Tensor> x) { return sum_all(exp(x[0])); }},
      {"log", [](std::span<const Tensor> x) { return sum_all(log(add_scalar(square(x[0]), 1.0))); }},
      {"elu", [](std::span<const Tensor> x) { return sum_all(square(elu(x[0]))); }},
      {"relu", [](std::span<const Tensor> x) { return sum_all(square(relu(x[0]))); }},
      {"abs", [](std::span<const Tensor> x) { return sum_all(square(abs(x[0]))); }},
      {"neg", [](std::span<const Tensor> x) { return sum_all(square(neg(x[0]))); }},
      {"softmax", [](std::span<const Tensor> x) { return sum_all(square(softmax(x[0], 1))); }},
      {"sum", [](std::span<const Tensor> x) { return sum_all(square(sum(x[0], 0))); }},
      {"mean", [](std::span<const Tensor> x) { return sum_all(square(mean(x[0], 1))); }},
      {"max", [](std::span<const Tensor> x) { return sum_all(square(max(x[0], 1))); }},
      {"set_sum", [](std::span<const Tensor> x) { return sum_all(square(set_sum(x[0], 0))); }},
      {"transpose", [](std::span<const Tensor> x) {
         return sum_all(square(matmul(transpose(x[0]), x[0])));
       }},
      {"narrow", [](std::span<const Tensor> x) { return sum_all(square(narrow(x[0], 1, 1, 2))); }},
      {"reshape", [](std::span<const Tensor> x) {
         return sum_all(square(matmul(reshape(x[0], {4, 3}), reshape(x[0], {3, 4}))));
       }},
  };
  for (const auto& [name, fn] : unary_ops) {
    CAPTURE(name);
    std::vector<Tensor> in{random_tensor({3, 4}, rng)};
    CHECK(grad_check(fn, in) < 1e-4);
  }

  std::vector<Tensor> in{random_tensor({3, 4}, rng), random_tensor({4}, rng, 0.5, 2.0)};
  CHECK(grad_check([](std::span<const Tensor> x) { return sum_all(square(mul(x[0], x[1]))); },
                   in) < 1e-4);
  CHECK(grad_check([](std::span<const Tensor> x) { return sum_all(square(div(x[0], x[1]))); },
                   in) < 1e-4);
  CHECK(grad_check([](std::span<const Tensor> x) { return sum_all(square(sub(x[0], x[1]))); },
                   in) < 1e-4);
  std::vector<Tensor> lin{random_tensor({5, 3}, rng), random_tensor({3, 4}, rng),
                          random_tensor({4}, rng)};
  CHECK(grad_check([](std::span<const Tensor> x) { return sum_all(square(linear(x[0], x[1], x[2]))); },
                   lin) < 1e-4);
  std::vector<Tensor> bm{random_tensor({2, 3, 4}, rng), random_tensor({2, 4, 2}, rng)};
  CHECK(grad_check([](std::span<const Tensor> x) { return sum_all(square(bmm(x[0], x[1]))); },
                   bm) < 1e-4);
  std::vector<Tensor> vm{random_tensor({5, 3}, rng), random_tensor({5, 6}, rng)};
  CHECK(grad_check([](std::span<const Tensor> x) { return sum_all(square(row_vecmat(x[0], x[1]))); },
                   vm) < 1e-4);
  std::vector<Tensor> cat{random_tensor({2, 3}, rng), random_tensor({2, 2}, rng)};
  CHECK(grad_check(
            [](std::span<const Tensor> x) {
              return sum_all(square(concat(std::span<const Tensor>(x.data(), 2), 1)));
            },
            cat) < 1e-4);
  std::vector<Tensor> g{random_tensor({4, 3}, rng)};
  CHECK(grad_check(
            [](std::span<const Tensor> x) {
              const std::size_t rows[] = {2, 0, 2};
              const std::size_t idx[] = {1, 0, 2};
              return sum_all(square(gather_last(take_rows(x[0], rows), idx)));
            },
            g) < 1e-4);
}

TEST_CASE("reduce examples") {
  CHECK(values(sum(Tensor({2, 2}, {1, 2, 3, 4}), 0)) == std::vector<double>{4, 6});
  Tensor m({3}, {1, 5, 5}, true);
  const Tensor top = max(m, 0);
  CHECK(top.item() == 5.0);
  top.backward();
  CHECK(values(Tensor({3}, {m.grad()[0], m.grad()[1], m.grad()[2]})) == std::vector<double>{0, 1, 0});
  CHECK(mean(Tensor({2}, {2, 4}), 0).item() == 3.0);
  CHECK_THROWS_AS(sum(Tensor::zeros({2}), 1), DimensionError);
}

TEST_CASE("set_sum is bitwise order independent") {
  Rng rng(5);
  const Tensor x = random_tensor({6, 3}, rng, -1e3, 1e3);
  const auto base = values(set_sum(x, 0));
  std::vector<double> rev(x.numel());
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 3; ++c) rev[r * 3 + c] = x.data()[(5 - r) * 3 + c];
  }
  CHECK(values(set_sum(Tensor({6, 3}, rev), 0)) == base);
}

TEST_CASE("softmax examples") {
  const auto u = values(softmax(Tensor({3}, {0, 0, 0}), 0));
  for (double v : u) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const auto big = values(softmax(Tensor({2}, {1000, 0}), 0));
  CHECK(big[0] == doctest::Approx(1.0));
  CHECK(std::isfinite(big[1]));
  CHECK(big[1] < 1e-300);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_WITH_AS(softmax(Tensor({2}, {-inf, -inf}), 0), "fully masked logits", NumericError);

  Rng rng(7);
  const Tensor r = softmax(random_tensor({4, 5}, rng, -5, 5), 1);
  for (std::size_t i = 0; i < 4; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(r.data()[i * 5 + j] > 0.0);
      s += r.data()[i * 5 + j];
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  std::vector<Tensor> in{random_tensor({5}, rng)};
  CHECK(grad_check(
            [](std::span<const Tensor> x) {
              return sum(mul(softmax(x[0], 0), Tensor({5}, {1, -2, 3, 0.5, 4})), 0);
            },
            in) < 1e-4);
}

TEST_CASE("gradients accumulate over multiple consumers") {
  Tensor a = Tensor({3}, {1, 2, 3}, true);
  sum_all(add(a, a)).backward();
  Tensor b = Tensor({3}, {1, 2, 3}, true);
  sum_all(scale(b, 2.0)).backward();
  for (std::size_t i = 0; i < 3; ++i) CHECK(a.grad()[i] == b.grad()[i]);
}

TEST_CASE("no-grad mode records nothing") {
  Tensor a = Tensor({2}, {1, 2}, true);
  NoGradGuard guard;
  CHECK_FALSE(add(a, a).requires_grad());
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    std::vector<NamedParameter> p{{"w", Tensor({3}, {1, -2, 3}, true)}};
    auto state = AdamState::for_parameters(p);
    zero_grad(p);
    sum_all(scale(p[0].tensor, 0.0)).backward();
    adam_step(p, state);
    CHECK(values(p[0].tensor) == std::vector<double>{1, -2, 3});
  }
  SUBCASE("first step moves by lr against the gradient sign") {
    std::vector<NamedParameter> p{{"w", Tensor({2}, {1, 1}, true)}};
    auto state = AdamState::for_parameters(p);
    sum_all(mul(p[0].tensor, Tensor({2}, {3, -0.5}))).backward();
    adam_step(p, state);
    CHECK(p[0].tensor.data()[0] == doctest::Approx(1.0 - 0.001).epsilon(1e-6));
    CHECK(p[0].tensor.data()[1] == doctest::Approx(1.0 + 0.001).epsilon(1e-6));
  }
  SUBCASE("minimises |x|^2 from 5, matching a scalar reference") {
    std::vector<NamedParameter> p{{"x", Tensor({1}, {5.0}, true)}};
    auto state = AdamState::for_parameters(p);
    double x = 5.0;
    double m = 0.0;
    double v = 0.0;
    int steps = 0;
    while (std::abs(p[0].tensor.data()[0]) >= 1e-2 && steps < 20000) {
      zero_grad(p);
      sum_all(square(p[0].tensor)).backward();
      adam_step(p, state);
      ++steps;
      const double g = 2.0 * x;
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      const double mh = m / (1.0 - std::pow(0.9, steps));
      const double vh = v / (1.0 - std::pow(0.999, steps));
      x -= 0.001 * mh / (std::sqrt(vh) + 1e-8);
      REQUIRE(p[0].tensor.data()[0] == doctest::Approx(x).epsilon(1e-12));
    }
    CHECK(std::abs(p[0].tensor.data()[0]) < 1e-2);
    MESSAGE("adam reached |x| < 1e-2 after " << steps << " steps");
  }
  SUBCASE("NaN gradient names the parameter") {
    std::vector<NamedParameter> p{{"layer.weight", Tensor({1}, {1.0}, true)}};
    auto state = AdamState::for_parameters(p);
    sum_all(scale(p[0].tensor, std::nan(""))).backward();
    CHECK_THROWS_WITH_AS(adam_step(p, state), doctest::Contains("layer.weight"), NumericError);
  }
}

TEST_CASE("grad_check examples") {
  Rng rng(1);
  std::vector<Tensor> x{random_tensor({4}, rng)};
  CHECK(grad_check([](std::span<const Tensor> in) { return sum_all(scale(in[0], 3.0)); }, x) < 1e-8);
  std::vector<Tensor> net{random_tensor({2, 3}, rng), random_tensor({3, 3}, rng),
                          random_tensor({3, 1}, rng)};
  CHECK(grad_check(
            [](std::span<const Tensor> in) {
              return sum_all(matmul(tanh(matmul(in[0], in[1])), in[2]));
            },
            net) < 1e-4);
  std::vector<Tensor> far{Tensor({3}, {2.0, -3.0, 5.0})};
  CHECK(grad_check([](std::span<const Tensor> in) { return sum_all(relu(in[0])); }, far) < 1e-6);
  std::vector<Tensor> bad{Tensor({1}, {1.0})};
  CHECK_THROWS_AS(
      grad_check([](std::span<const Tensor> in) { return sum_all(scale(in[0], std::nan(""))); }, bad),
      NumericError);
}

TEST_CASE("determinism: identical inputs give identical outputs") {
  auto run = [] {
    Rng rng(99);
    Mlp mlp({4, 8, 3}, rng);
    const Tensor x = random_tensor({5, 4}, rng);
    return values(softmax(mlp.forward(x), 1));
  };
  CHECK(run() == run());
}

TEST_CASE("count_parameters") {
  Rng rng(0);
  CHECK(count_parameters(Dense(4, 3, rng)) == 15);
  CHECK(count_parameters(Mlp({4, 8, 3}, rng)) == 4 * 8 + 8 + 8 * 3 + 3);
  struct Empty : Module {
    void collect_parameters(const std::string&, std::vector<NamedParameter>&) const override {}
  };
  CHECK(count_parameters(Empty{}) == 0);
}
