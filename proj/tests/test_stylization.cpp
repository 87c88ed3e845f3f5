#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ash/grad_check.hpp"
#include "ash/ops.hpp"
#include "ash/rng.hpp"
#include "ash/stylization.hpp"
#include "oracles.hpp"

using namespace ash;

namespace {

Tensor random_tensor(Shape shape, uint64_t seed, double lo = -1.0, double hi = 1.0) {
  auto rng = make_rng(seed, "test:random");
  std::vector<double> data(static_cast<size_t>(shape_numel(shape)));
  for (auto& v : data) v = uniform(rng, lo, hi);
  return Tensor::from_data(std::move(shape), std::move(data));
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("channel_stats of a constant channel") {
  Tensor f = Tensor::full({1, 2, 2}, 3.0);
  ChannelStats st = channel_stats(f);
  CHECK(st.mean[0] == doctest::Approx(3.0));
  CHECK(st.std[0] == doctest::Approx(std::sqrt(1e-8)));
}

TEST_CASE("channel_stats of 1,2,3,4 uses the population convention") {
  Tensor f = Tensor::from_data({1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
  ChannelStats st = channel_stats(f);
  CHECK(st.mean[0] == doctest::Approx(2.5));
  CHECK(st.std[0] == doctest::Approx(1.118034).epsilon(1e-6));
}

TEST_CASE("channel_stats is invariant under spatial permutation") {
  Tensor f = random_tensor({4, 3, 5}, 1);
  ChannelStats st = channel_stats(f);

  // Reverse every channel's spatial layout.
  std::vector<double> data = f.values();
  const int hw = 15;
  for (int c = 0; c < 4; ++c) {
    std::reverse(data.begin() + static_cast<size_t>(c) * hw,
                 data.begin() + static_cast<size_t>(c + 1) * hw);
  }
  ChannelStats st2 = channel_stats(Tensor::from_data({4, 3, 5}, std::move(data)));
  for (int c = 0; c < 4; ++c) {
    CHECK(st.mean[c] == doctest::Approx(st2.mean[c]).epsilon(1e-12));
    CHECK(st.std[c] == doctest::Approx(st2.std[c]).epsilon(1e-12));
  }
}

TEST_CASE("adain(f, f) is the identity to 1e-6") {
  Tensor f = random_tensor({3, 4, 4}, 2);
  Tensor y = adain(f, f);
  CHECK(max_abs_diff(y.values(), f.values()) < 1e-6);
}

TEST_CASE("adain worked example") {
  Tensor fc = Tensor::from_data({1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
  Tensor fs = Tensor::from_data({1, 2, 2}, {0.0, 0.0, 2.0, 2.0});
  Tensor y = adain(fc, fs);

  const double sc = std::sqrt(1.25 + 1e-8);
  const double ss = std::sqrt(1.0 + 1e-8);
  const double expected[4] = {ss * (1.0 - 2.5) / sc + 1.0, ss * (2.0 - 2.5) / sc + 1.0,
                              ss * (3.0 - 2.5) / sc + 1.0, ss * (4.0 - 2.5) / sc + 1.0};
  for (int i = 0; i < 4; ++i) CHECK(y.values()[i] == doctest::Approx(expected[i]).epsilon(1e-10));
  // The quoted three-decimal values.
  CHECK(y.values()[0] == doctest::Approx(-0.342).epsilon(2e-3));
  CHECK(y.values()[1] == doctest::Approx(0.553).epsilon(2e-3));
  CHECK(y.values()[2] == doctest::Approx(1.447).epsilon(2e-3));
  CHECK(y.values()[3] == doctest::Approx(2.342).epsilon(2e-3));
}

TEST_CASE("adain output carries the style statistics") {
  for (uint64_t s = 0; s < 10; ++s) {
    Tensor fc = random_tensor({5, 4, 4}, 100 + s, -2, 2);
    Tensor fs = random_tensor({5, 6, 6}, 200 + s, -1, 3);  // different spatial extents
    ChannelStats target = channel_stats(fs);
    ChannelStats got = channel_stats(adain(fc, fs));
    for (int c = 0; c < 5; ++c) {
      CHECK(got.mean[c] == doctest::Approx(target.mean[c]).epsilon(1e-5));
      CHECK(got.std[c] == doctest::Approx(target.std[c]).epsilon(1e-5));
    }
  }
}

TEST_CASE("adain rejects channel mismatch") {
  CHECK_THROWS_AS(adain(random_tensor({2, 4, 4}, 3), random_tensor({3, 4, 4}, 4)), ShapeError);
}

TEST_CASE("adain differentiates through both arguments") {
  Tensor fs0 = random_tensor({2, 3, 3}, 5);
  Tensor fc0 = random_tensor({2, 3, 3}, 6);
  Tensor proj = random_tensor({2, 3, 3}, 7);
  auto wrt_content = [&](const Tensor& fc) { return sum(mul(adain(fc, fs0), proj)); };
  CHECK(grad_check(wrt_content, fc0) < 1e-4);
  auto wrt_style = [&](const Tensor& fs) { return sum(mul(adain(fc0, fs), proj)); };
  CHECK(grad_check(wrt_style, fs0) < 1e-4);
}

TEST_CASE("orthogonal noise with identity hook leaves features unchanged") {
  Tensor f = random_tensor({3, 4, 4}, 8);
  Tensor q = Tensor::zeros({3, 3});
  for (int i = 0; i < 3; ++i) q.raw()[i * 3 + i] = 1.0;
  Tensor y = orthogonal_noise_with(q, f);
  CHECK(max_abs_diff(y.values(), f.values()) == 0.0);
}

TEST_CASE("90-degree rotation maps channel pair (a,b) to (-b,a)") {
  Tensor f = random_tensor({2, 3, 3}, 9);
  Tensor q = Tensor::from_data({2, 2}, {0.0, -1.0, 1.0, 0.0});
  Tensor y = orthogonal_noise_with(q, f);
  const int hw = 9;
  for (int s = 0; s < hw; ++s) {
    CHECK(y.values()[s] == -f.values()[hw + s]);
    CHECK(y.values()[hw + s] == f.values()[s]);
  }
  // Pairwise spatial-site inner products preserved exactly: rotation by the
  // permutation-with-sign matrix does not even round.
  for (int s = 0; s < hw; ++s) {
    for (int t = s; t < hw; ++t) {
      const double before = f.values()[s] * f.values()[t] + f.values()[hw + s] * f.values()[hw + t];
      const double after = y.values()[s] * y.values()[t] + y.values()[hw + s] * y.values()[hw + t];
      CHECK(before == after);
    }
  }
}

TEST_CASE("sampled orthogonal matrices are orthogonal and preserve the Gram matrix") {
  for (uint64_t seed = 0; seed < 8; ++seed) {
    const int c = 16;
    Tensor q = sample_orthogonal(c, seed);
    // ||Q^T Q - I||_max
    double worst = 0.0;
    for (int i = 0; i < c; ++i) {
      for (int j = 0; j < c; ++j) {
        double dot = 0.0;
        for (int k = 0; k < c; ++k) dot += q.values()[k * c + i] * q.values()[k * c + j];
        worst = std::max(worst, std::fabs(dot - (i == j ? 1.0 : 0.0)));
      }
    }
    CHECK(worst <= 1e-10);

    // Gram of the per-site channel vectors: G[s][t] = <f[:,s], f[:,t]>.
    Tensor f = random_tensor({c, 5, 5}, 300 + seed);
    Tensor y = orthogonal_noise(f, seed);
    const int hw = 25;
    for (int s = 0; s < hw; s += 3) {
      for (int t = s; t < hw; t += 2) {
        double gram_f = 0.0, gram_y = 0.0;
        for (int ch = 0; ch < c; ++ch) {
          gram_f += f.values()[static_cast<size_t>(ch) * hw + s] * f.values()[static_cast<size_t>(ch) * hw + t];
          gram_y += y.values()[static_cast<size_t>(ch) * hw + s] * y.values()[static_cast<size_t>(ch) * hw + t];
        }
        CHECK(std::fabs(gram_f - gram_y) <= 1e-8);
      }
    }
  }
}

TEST_CASE("sample_orthogonal is a deterministic function of the seed") {
  Tensor a = sample_orthogonal(8, 42);
  Tensor b = sample_orthogonal(8, 42);
  CHECK(max_abs_diff(a.values(), b.values()) == 0.0);
  Tensor c = sample_orthogonal(8, 43);
  CHECK(max_abs_diff(a.values(), c.values()) > 1e-3);
}

TEST_CASE("content loss of identical maps is zero") {
  Tensor f = random_tensor({2, 3, 3}, 10);
  CHECK(content_loss(f, f).value() == 0.0);
  CHECK_THROWS_AS(content_loss(f, random_tensor({2, 4, 4}, 11)), ShapeError);
}

TEST_CASE("style loss vanishes whenever the channel stats agree") {
  Tensor f = random_tensor({2, 2, 2}, 12);
  // Reverse each channel: different tensor, identical statistics.
  std::vector<double> data = f.values();
  std::reverse(data.begin(), data.begin() + 4);
  std::reverse(data.begin() + 4, data.end());
  Tensor g = Tensor::from_data({2, 2, 2}, std::move(data));
  CHECK(max_abs_diff(f.values(), g.values()) > 0.0);
  CHECK(style_loss(f, g).value() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("style loss worked example") {
  Tensor f = Tensor::from_data({1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
  Tensor g = Tensor::from_data({1, 2, 2}, {0.0, 0.0, 2.0, 2.0});
  const double expected = (2.5 - 1.0) * (2.5 - 1.0) +
                          (std::sqrt(1.25 + 1e-8) - std::sqrt(1.0 + 1e-8)) *
                              (std::sqrt(1.25 + 1e-8) - std::sqrt(1.0 + 1e-8));
  CHECK(style_loss(f, g).value() == doctest::Approx(expected).epsilon(1e-12));
  CHECK(style_loss(f, g).value() == doctest::Approx(2.2639).epsilon(1e-4));
}

TEST_CASE("losses are nonnegative and differentiable") {
  auto rng = make_rng(99, "test:loss-prop");
  for (int trial = 0; trial < 10; ++trial) {
    Tensor a = random_tensor({3, 4, 4}, 400 + trial, -2, 2);
    Tensor b = random_tensor({3, 4, 4}, 500 + trial, -2, 2);
    CHECK(content_loss(a, b).value() >= 0.0);
    CHECK(style_loss(a, b).value() >= 0.0);
  }
  Tensor b0 = random_tensor({2, 3, 3}, 600);
  auto fc = [&](const Tensor& a) { return content_loss(a, b0); };
  CHECK(grad_check(fc, random_tensor({2, 3, 3}, 601)) < 1e-4);
  auto fsty = [&](const Tensor& a) { return style_loss(a, b0); };
  CHECK(grad_check(fsty, random_tensor({2, 3, 3}, 602)) < 1e-4);
}

TEST_CASE("content_style_losses bundles the three terms") {
  Tensor f_src = random_tensor({2, 3, 3}, 700);
  Tensor f_sty = random_tensor({2, 3, 3}, 701);
  Tensor merged = adain(f_src, f_sty);
  ContentStyleLosses losses = content_style_losses(f_src, f_sty, merged);
  CHECK(losses.content.value() == doctest::Approx(content_loss(f_src, merged).value()));
  CHECK(losses.style_style.value() == doctest::Approx(style_loss(f_sty, merged).value()));
  CHECK(losses.style_source.value() == doctest::Approx(style_loss(f_src, merged).value()));
  // After adain, the merged features carry the style stats.
  CHECK(losses.style_style.value() == doctest::Approx(0.0).epsilon(1e-8));
}
