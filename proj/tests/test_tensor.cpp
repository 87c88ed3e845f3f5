#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ash/grad_check.hpp"
#include "ash/ops.hpp"
#include "ash/optim.hpp"
#include "ash/rng.hpp"
#include "oracles.hpp"

using namespace ash;

namespace {

Tensor random_tensor(Shape shape, uint64_t seed, double lo = -1.0, double hi = 1.0,
                     bool requires_grad = false) {
  auto rng = make_rng(seed, "test:random");
  std::vector<double> data(static_cast<size_t>(shape_numel(shape)));
  for (auto& v : data) v = uniform(rng, lo, hi);
  return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

}  // namespace

TEST_CASE("conv2d 1x1 identity kernel") {
  Tensor x = random_tensor({1, 4, 4}, 1);
  Tensor w = Tensor::full({1, 1, 1, 1}, 1.0);
  Tensor b = Tensor::zeros({1});
  Tensor y = conv2d(x, w, b, 1, 0);
  REQUIRE(y.shape() == Shape{1, 4, 4});
  for (int i = 0; i < 16; ++i) CHECK(y.values()[i] == x.values()[i]);
}

TEST_CASE("conv2d zero weights and bias give zero output") {
  Tensor x = random_tensor({2, 5, 5}, 2);
  Tensor w = Tensor::zeros({3, 2, 3, 3});
  Tensor b = Tensor::zeros({3});
  Tensor y = conv2d(x, w, b, 1, 1);
  for (double v : y.values()) CHECK(v == 0.0);
}

TEST_CASE("conv2d all-ones 3x3 valid window sums to 9") {
  Tensor x = Tensor::full({1, 3, 3}, 1.0);
  Tensor w = Tensor::full({1, 1, 3, 3}, 1.0);
  Tensor b = Tensor::zeros({1});
  Tensor y = conv2d(x, w, b, 1, 0);
  REQUIRE(y.shape() == Shape{1, 1, 1});
  CHECK(y.value() == doctest::Approx(9.0));
}

TEST_CASE("conv2d matches the brute-force oracle") {
  struct Case {
    oracle::ConvSpec spec;
    uint64_t seed;
  };
  const Case cases[] = {
      {{3, 8, 8, 4, 3, 1, 1}, 10},
      {{2, 8, 6, 5, 4, 2, 1}, 11},
      {{1, 7, 7, 2, 3, 2, 0}, 12},
      {{4, 6, 6, 3, 1, 1, 0}, 13},
      {{2, 9, 9, 2, 5, 2, 2}, 14},
  };
  for (const auto& c : cases) {
    CAPTURE(c.seed);
    Tensor x = random_tensor({c.spec.c_in, c.spec.h, c.spec.w}, c.seed);
    Tensor w = random_tensor({c.spec.c_out, c.spec.c_in, c.spec.k, c.spec.k}, c.seed + 100);
    Tensor b = random_tensor({c.spec.c_out}, c.seed + 200);
    Tensor y = conv2d(x, w, b, c.spec.stride, c.spec.pad);
    std::vector<double> expected = oracle::conv2d(c.spec, x.values(), w.values(), b.values());
    REQUIRE(y.values().size() == expected.size());
    for (size_t i = 0; i < expected.size(); ++i) {
      CHECK(y.values()[i] == doctest::Approx(expected[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("conv2d shape errors name the offending axis") {
  Tensor x = Tensor::zeros({3, 4, 4});
  Tensor w = Tensor::zeros({2, 4, 3, 3});  // wrong input channels
  Tensor b = Tensor::zeros({2});
  CHECK_THROWS_WITH_AS(conv2d(x, w, b, 1, 1),
                       doctest::Contains("axis 1"), ShapeError);
  Tensor w2 = Tensor::zeros({2, 3, 3, 3});
  CHECK_THROWS_AS(conv2d(x, w2, b, 2, 1), ShapeError);  // (4+2-3)/2+1 not integral
  Tensor b2 = Tensor::zeros({5});
  CHECK_THROWS_WITH_AS(conv2d(x, w2, b2, 1, 1), doctest::Contains("bias"), ShapeError);
}

TEST_CASE("relu definition") {
  Tensor x = Tensor::from_data({3}, {-1.0, 0.0, 2.0});
  Tensor y = relu(x);
  CHECK(y.values() == std::vector<double>{0.0, 0.0, 2.0});
}

TEST_CASE("matmul_channels with identity leaves features unchanged") {
  Tensor f = random_tensor({3, 4, 4}, 3);
  Tensor q = Tensor::zeros({3, 3});
  for (int i = 0; i < 3; ++i) q.raw()[i * 3 + i] = 1.0;
  Tensor y = matmul_channels(q, f);
  for (size_t i = 0; i < f.values().size(); ++i) CHECK(y.values()[i] == f.values()[i]);
}

TEST_CASE("nearest_upsample replicates blocks") {
  Tensor x = Tensor::from_data({1, 1, 1}, {5.0});
  Tensor y = nearest_upsample(x, 2);
  REQUIRE(y.shape() == Shape{1, 2, 2});
  for (double v : y.values()) CHECK(v == 5.0);
}

TEST_CASE("avg_pool means blocks and rejects non-divisible factors") {
  Tensor x = Tensor::from_data({1, 2, 2}, {1.0, 2.0, 3.0, 6.0});
  Tensor y = avg_pool(x, 2);
  CHECK(y.value() == doctest::Approx(3.0));
  CHECK_THROWS_AS(avg_pool(random_tensor({1, 6, 6}, 4), 4), ShapeError);
}

TEST_CASE("backward of sum gives unit gradients") {
  Tensor x = random_tensor({2, 2}, 5, -1, 1, /*requires_grad=*/true);
  sum(x).backward();
  for (double g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("backward of sum of squares") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
  sum(mul(x, x)).backward();
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("repeated backward accumulates until zero_grad resets") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
  sum(x).backward();
  sum(x).backward();
  CHECK(x.grad()[0] == 2.0);
  x.zero_grad();
  sum(x).backward();
  CHECK(x.grad()[0] == 1.0);
}

TEST_CASE("backward on a non-scalar loss is rejected") {
  Tensor x = random_tensor({3}, 6, -1, 1, true);
  CHECK_THROWS_AS(relu(x).backward(), std::invalid_argument);
}

TEST_CASE("fan-out accumulates both consumers") {
  // y = sum(x * x') where x feeds two consumers: y = sum(x*2 + x^2)
  auto f = [](const Tensor& x) { return sum(add(mul_scalar(x, 2.0), mul(x, x))); };
  Tensor x = random_tensor({5}, 7);
  CHECK(grad_check(f, x) < 1e-8);
}

TEST_CASE("grad_check is exact for linear functions") {
  auto f = [](const Tensor& x) { return sum(x); };
  Tensor x = random_tensor({4, 4}, 8);
  CHECK(grad_check(f, x) <= 1e-10);
}

TEST_CASE("grad_check rejects out-of-range h") {
  auto f = [](const Tensor& x) { return sum(x); };
  Tensor x = random_tensor({2}, 9);
  CHECK_THROWS_AS(grad_check(f, x, 1e-2), std::invalid_argument);
  CHECK_THROWS_AS(grad_check(f, x, 1e-8), std::invalid_argument);
}

TEST_CASE("elementwise and reduction ops pass grad_check at random points") {
  struct Named {
    const char* name;
    std::function<Tensor(const Tensor&)> f;
  };
  const Named fns[] = {
      {"relu+mul", [](const Tensor& x) { return sum(mul(relu(x), x)); }},
      {"sigmoid", [](const Tensor& x) { return sum(sigmoid(x)); }},
      {"leaky", [](const Tensor& x) { return sum(leaky_relu(x, 0.2)); }},
      {"exp/log", [](const Tensor& x) { return mean(log(add_scalar(exp(x), 1.0))); }},
      {"sqrt", [](const Tensor& x) { return sum(sqrt(add_scalar(mul(x, x), 1.0))); }},
      {"div", [](const Tensor& x) { return sum(div(x, add_scalar(mul(x, x), 2.0))); }},
      {"softmax", [](const Tensor& x) { return sum(mul(softmax_channels(x), x)); }},
      {"upsample", [](const Tensor& x) { return sum(mul(nearest_upsample(x, 2), nearest_upsample(x, 2))); }},
      {"avg_pool", [](const Tensor& x) { return sum(mul(avg_pool(x, 2), avg_pool(x, 2))); }},
      {"chan_mean", [](const Tensor& x) {
         Tensor m = channel_mean(x);
         return sum(mul(expand_channels(m, x.dim(1), x.dim(2)), x));
       }},
  };
  for (const auto& fn : fns) {
    CAPTURE(fn.name);
    for (int p = 0; p < 3; ++p) {
      Tensor x = random_tensor({3, 4, 4}, 100 + p, -0.9, 0.9);
      CHECK(grad_check(fn.f, x) < 1e-4);
    }
  }
}

TEST_CASE("conv2d passes grad_check for input, weight and bias") {
  auto rng_proj = random_tensor({2, 4, 4}, 40);
  Tensor x0 = random_tensor({2, 4, 4}, 41);
  Tensor w0 = random_tensor({2, 2, 3, 3}, 42);
  Tensor b0 = random_tensor({2}, 43);

  auto wrt_input = [&](const Tensor& x) { return sum(mul(conv2d(x, w0, b0, 1, 1), rng_proj)); };
  CHECK(grad_check(wrt_input, x0) < 1e-4);

  auto wrt_weight = [&](const Tensor& w) { return sum(mul(conv2d(x0, w, b0, 1, 1), rng_proj)); };
  CHECK(grad_check(wrt_weight, w0) < 1e-4);

  auto wrt_bias = [&](const Tensor& b) { return sum(mul(conv2d(x0, w0, b, 1, 1), rng_proj)); };
  CHECK(grad_check(wrt_bias, b0) < 1e-4);
}

TEST_CASE("forward determinism: identical inputs give bit-identical outputs") {
  Tensor x = random_tensor({3, 6, 6}, 50);
  Tensor w = random_tensor({4, 3, 3, 3}, 51);
  Tensor b = random_tensor({4}, 52);
  Tensor y1 = conv2d(x, w, b, 1, 1);
  Tensor y2 = conv2d(x, w, b, 1, 1);
  REQUIRE(y1.values().size() == y2.values().size());
  for (size_t i = 0; i < y1.values().size(); ++i) CHECK(y1.values()[i] == y2.values()[i]);
}

TEST_CASE("sgd_momentum first step and zero-grad behavior") {
  Tensor p = Tensor::from_data({1}, {1.0}, true);
  SgdMomentum opt({{"p", p}}, 0.1, 0.9);
  sum(p).backward();  // g = 1
  opt.step();
  CHECK(p.values()[0] == doctest::Approx(0.9));

  opt.zero_grad();
  opt.step();  // zero gradient, but momentum keeps a velocity of 0.9
  CHECK(p.values()[0] == doctest::Approx(0.9 - 0.1 * 0.9));
}

TEST_CASE("sgd_momentum with zero gradient and zero velocity is a no-op") {
  Tensor p = Tensor::from_data({2}, {1.0, -2.0}, true);
  SgdMomentum opt({{"p", p}}, 0.1, 0.9);
  sum(mul_scalar(p, 0.0)).backward();  // g = 0
  opt.step();
  CHECK(p.values()[0] == 1.0);
  CHECK(p.values()[1] == -2.0);
}

TEST_CASE("two sgd_momentum steps with constant unit gradient total 0.29") {
  Tensor p = Tensor::from_data({1}, {0.0}, true);
  SgdMomentum opt({{"p", p}}, 0.1, 0.9);
  for (int i = 0; i < 2; ++i) {
    p.zero_grad();
    sum(p).backward();
    opt.step();
  }
  CHECK(p.values()[0] == doctest::Approx(-0.29));
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
  Tensor p = Tensor::from_data({1}, {3.0}, true);
  Adam opt({{"p", p}}, 1e-3);
  sum(mul_scalar(p, 0.0)).backward();
  opt.step();
  CHECK(p.values()[0] == 3.0);
}

TEST_CASE("adam first step moves by roughly lr against the gradient sign") {
  Tensor p = Tensor::from_data({1}, {0.0}, true);
  Adam opt({{"p", p}}, 1e-3);
  sum(mul_scalar(p, 2.0)).backward();  // g = 2
  opt.step();
  CHECK(p.values()[0] == doctest::Approx(-1e-3).epsilon(1e-4));
}

TEST_CASE("optimizer step without gradients lists parameter names") {
  Tensor a = Tensor::zeros({2}, true);
  Tensor b = Tensor::zeros({2}, true);
  SgdMomentum opt({{"weights.a", a}, {"weights.b", b}}, 0.1);
  CHECK_THROWS_WITH_AS(opt.step(), doctest::Contains("weights.a"), std::runtime_error);
}

TEST_CASE("optimizer rejects frozen parameters") {
  Tensor a = Tensor::zeros({2}, true);
  a.set_requires_grad(false);
  CHECK_THROWS_WITH_AS(SgdMomentum({{"frozen.a", a}}, 0.1),
                       doctest::Contains("frozen.a"), std::invalid_argument);
}

TEST_CASE("no-grad guard suppresses graph growth") {
  Tensor x = random_tensor({3}, 60, -1, 1, true);
  NoGradGuard ng;
  Tensor y = relu(x);
  CHECK_FALSE(y.needs_grad());
}
