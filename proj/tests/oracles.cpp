#include "oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace oracle {

std::vector<double> conv2d(const ConvSpec& spec, const std::vector<double>& input,
                           const std::vector<double>& weight,
                           const std::vector<double>& bias) {
  const int oh = (spec.h + 2 * spec.pad - spec.k) / spec.stride + 1;
  const int ow = (spec.w + 2 * spec.pad - spec.k) / spec.stride + 1;
  std::vector<double> out(static_cast<size_t>(spec.c_out) * oh * ow, 0.0);
  for (int co = 0; co < spec.c_out; ++co) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = bias[co];
        for (int ci = 0; ci < spec.c_in; ++ci) {
          for (int ky = 0; ky < spec.k; ++ky) {
            for (int kx = 0; kx < spec.k; ++kx) {
              const int iy = oy * spec.stride + ky - spec.pad;
              const int ix = ox * spec.stride + kx - spec.pad;
              if (iy < 0 || iy >= spec.h || ix < 0 || ix >= spec.w) continue;  // zero pad
              const double iv = input[(static_cast<size_t>(ci) * spec.h + iy) * spec.w + ix];
              const double wv =
                  weight[((static_cast<size_t>(co) * spec.c_in + ci) * spec.k + ky) * spec.k + kx];
              acc += iv * wv;
            }
          }
        }
        out[(static_cast<size_t>(co) * oh + oy) * ow + ox] = acc;
      }
    }
  }
  return out;
}

void stats(const std::vector<double>& f, int c, int hw, std::vector<double>& mean,
           std::vector<double>& stddev) {
  mean.assign(c, 0.0);
  stddev.assign(c, 0.0);
  for (int ci = 0; ci < c; ++ci) {
    double m = 0.0;
    for (int i = 0; i < hw; ++i) m += f[static_cast<size_t>(ci) * hw + i];
    m /= hw;
    double var = 0.0;
    for (int i = 0; i < hw; ++i) {
      const double d = f[static_cast<size_t>(ci) * hw + i] - m;
      var += d * d;
    }
    var /= hw;
    mean[ci] = m;
    stddev[ci] = std::sqrt(var + 1e-8);
  }
}

namespace {

double stat_dist(const std::vector<double>& a, const std::vector<double>& b, int c, int hw) {
  std::vector<double> ma, sa, mb, sb;
  stats(a, c, hw, ma, sa);
  stats(b, c, hw, mb, sb);
  double total = 0.0;
  for (int i = 0; i < c; ++i) {
    total += (ma[i] - mb[i]) * (ma[i] - mb[i]);
    total += (sa[i] - sb[i]) * (sa[i] - sb[i]);
  }
  return total;
}

}  // namespace

double ash_loss(double adv, const std::vector<double>& f_src,
                const std::vector<double>& f_prime, const std::vector<double>& merged,
                int c, int hw, double margin) {
  double content = 0.0;
  for (size_t i = 0; i < f_src.size(); ++i) {
    const double d = f_src[i] - merged[i];
    content += d * d;
  }
  const double s_style = stat_dist(f_prime, merged, c, hw);
  const double s_src = stat_dist(f_src, merged, c, hw);
  const double hinge = std::max(0.0, margin - s_src);
  return -adv + content + s_style + hinge;
}

double head_l1(const AshForwardSpec& spec, const std::vector<double>& prob,
               const std::vector<double>& embed_w, const std::vector<double>& embed_b,
               const std::vector<double>& head_w, const std::vector<double>& head_b) {
  const int ph = spec.h / spec.pool_factor;
  const int pw = spec.w / spec.pool_factor;

  // label smoothing + average pooling
  std::vector<double> pooled(static_cast<size_t>(spec.classes) * ph * pw, 0.0);
  for (int c = 0; c < spec.classes; ++c) {
    for (int py = 0; py < ph; ++py) {
      for (int px = 0; px < pw; ++px) {
        double acc = 0.0;
        for (int fy = 0; fy < spec.pool_factor; ++fy) {
          for (int fx = 0; fx < spec.pool_factor; ++fx) {
            const int y = py * spec.pool_factor + fy;
            const int x = px * spec.pool_factor + fx;
            const double p = prob[(static_cast<size_t>(c) * spec.h + y) * spec.w + x];
            acc += (1.0 - spec.eps_smooth) * p + spec.eps_smooth / spec.classes;
          }
        }
        pooled[(static_cast<size_t>(c) * ph + py) * pw + px] =
            acc / (spec.pool_factor * spec.pool_factor);
      }
    }
  }

  ConvSpec embed{spec.classes, ph, pw, spec.embed_channels, 3, 1, 1};
  std::vector<double> e = conv2d(embed, pooled, embed_w, embed_b);
  for (auto& v : e) v = v > 0.0 ? v : 0.0;

  ConvSpec head{spec.embed_channels, ph, pw, spec.feature_channels, 3, 1, 1};
  std::vector<double> out = conv2d(head, e, head_w, head_b);
  double l1 = 0.0;
  for (double v : out) l1 += std::fabs(v);
  return l1;
}

}  // namespace oracle
