#include "ash/stylization.hpp"

#include <cmath>

#include "ash/ops.hpp"
#include "ash/rng.hpp"

namespace ash {

namespace {
constexpr double kVarEps = 1e-8;

void require_chw(const char* op, const Tensor& t) {
  if (t.shape().size() != 3) {
    throw ShapeError(std::string(op) + ": expected [C,H,W], got " + shape_str(t.shape()));
  }
}
}  // namespace

ChannelStats channel_stats(const Tensor& f) {
  require_chw("channel_stats", f);
  const int c = f.dim(0), h = f.dim(1), w = f.dim(2);
  const int hw = h * w;
  ChannelStats st;
  st.mean.resize(c);
  st.std.resize(c);
  const double* p = f.values().data();
  for (int ci = 0; ci < c; ++ci) {
    const double* ch = p + static_cast<size_t>(ci) * hw;
    double m = 0.0;
    for (int i = 0; i < hw; ++i) m += ch[i];
    m /= hw;
    double var = 0.0;
    for (int i = 0; i < hw; ++i) {
      const double d = ch[i] - m;
      var += d * d;
    }
    var /= hw;
    st.mean[ci] = m;
    st.std[ci] = std::sqrt(var + kVarEps);
  }
  return st;
}

ChannelStatsT channel_stats_t(const Tensor& f) {
  require_chw("channel_stats", f);
  const int h = f.dim(1), w = f.dim(2);
  Tensor mu = channel_mean(f);
  Tensor centered = f - expand_channels(mu, h, w);
  Tensor var = channel_mean(centered * centered);
  Tensor sigma = sqrt(var + kVarEps);
  return {mu, sigma};
}

Tensor adain(const Tensor& f_content, const Tensor& f_style) {
  require_chw("adain", f_content);
  require_chw("adain", f_style);
  if (f_content.dim(0) != f_style.dim(0)) {
    throw ShapeError("adain: channel axis 0 mismatch: content " + std::to_string(f_content.dim(0)) +
                     " vs style " + std::to_string(f_style.dim(0)));
  }
  const int h = f_content.dim(1), w = f_content.dim(2);
  ChannelStatsT cs = channel_stats_t(f_content);
  ChannelStatsT ss = channel_stats_t(f_style);
  Tensor normalized = div(f_content - expand_channels(cs.mean, h, w),
                          expand_channels(cs.std, h, w));
  return mul(normalized, expand_channels(ss.std, h, w)) + expand_channels(ss.mean, h, w);
}

Tensor sample_orthogonal(int c, uint64_t seed) {
  if (c < 1) throw ShapeError("sample_orthogonal: need C >= 1");
  auto rng = make_rng(seed, "orthogonal_noise");
  std::vector<double> a(static_cast<size_t>(c) * c);
  for (auto& v : a) v = gaussian(rng);

  // Modified Gram-Schmidt over columns, run twice for orthogonality down to
  // machine precision, then sign-fix so Q is unique given the sample.
  auto col = [&](std::vector<double>& m, int j, int i) -> double& {
    return m[static_cast<size_t>(i) * c + j];
  };
  std::vector<double> q = a;
  for (int pass = 0; pass < 2; ++pass) {
    for (int j = 0; j < c; ++j) {
      for (int k = 0; k < j; ++k) {
        double dot = 0.0;
        for (int i = 0; i < c; ++i) dot += col(q, k, i) * col(q, j, i);
        for (int i = 0; i < c; ++i) col(q, j, i) -= dot * col(q, k, i);
      }
      double norm = 0.0;
      for (int i = 0; i < c; ++i) norm += col(q, j, i) * col(q, j, i);
      norm = std::sqrt(norm);
      if (norm == 0.0) throw std::runtime_error("sample_orthogonal: degenerate Gaussian sample");
      for (int i = 0; i < c; ++i) col(q, j, i) /= norm;
    }
  }
  // Match the QR convention with positive diagonal of R: r_jj = q_j . a_j.
  for (int j = 0; j < c; ++j) {
    double r = 0.0;
    for (int i = 0; i < c; ++i) r += col(q, j, i) * col(a, j, i);
    if (r < 0.0)
      for (int i = 0; i < c; ++i) col(q, j, i) = -col(q, j, i);
  }
  return Tensor::from_data({c, c}, std::move(q));
}

Tensor orthogonal_noise(const Tensor& f_style, uint64_t seed) {
  require_chw("orthogonal_noise", f_style);
  return matmul_channels(sample_orthogonal(f_style.dim(0), seed), f_style);
}

Tensor orthogonal_noise_with(const Tensor& q, const Tensor& f_style) {
  return matmul_channels(q, f_style);
}

Tensor content_loss(const Tensor& a, const Tensor& b) {
  check_same_shape("content_loss", a, b);
  Tensor d = a - b;
  return sum(d * d);
}

Tensor style_loss(const Tensor& a, const Tensor& b) {
  if (a.dim(0) != b.dim(0)) {
    throw ShapeError("style_loss: channel axis 0 mismatch: " + std::to_string(a.dim(0)) +
                     " vs " + std::to_string(b.dim(0)));
  }
  ChannelStatsT sa = channel_stats_t(a);
  ChannelStatsT sb = channel_stats_t(b);
  Tensor dm = sa.mean - sb.mean;
  Tensor ds = sa.std - sb.std;
  return sum(dm * dm) + sum(ds * ds);
}

ContentStyleLosses content_style_losses(const Tensor& f_src, const Tensor& f_style,
                                        const Tensor& merged) {
  return {content_loss(f_src, merged), style_loss(f_style, merged),
          style_loss(f_src, merged)};
}

}  // namespace ash
