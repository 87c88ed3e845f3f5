#pragma once

// Test-side oracles, written independently of the library kernels they check:
// plain nested loops with explicit index arithmetic, no compute graph.

#include <cstdint>
#include <vector>

namespace oracle {

struct ConvSpec {
  int c_in, h, w;
  int c_out, k;
  int stride, pad;
};

// Cross-correlation with zero padding, the straightforward 7-loop version.
std::vector<double> conv2d(const ConvSpec& spec, const std::vector<double>& input,
                           const std::vector<double>& weight,
                           const std::vector<double>& bias);

// Per-channel population statistics with the 1e-8 stabilizer inside the sqrt.
void stats(const std::vector<double>& f, int c, int hw, std::vector<double>& mean,
           std::vector<double>& stddev);

// Straight-line re-evaluation of the four-term conditioner objective:
//   -adv + sum((f_src - merged)^2)
//        + stat_dist(f_prime, merged)
//        + max(0, margin - stat_dist(f_src, merged))
// where stat_dist is the squared distance between channel means plus between
// channel stds.
double ash_loss(double adv, const std::vector<double>& f_src,
                const std::vector<double>& f_prime, const std::vector<double>& merged,
                int c, int hw, double margin);

// Straight-line conditioner forward: smoothing, average pooling, embed conv +
// relu, head conv; returns the L1 norm of the head output.
struct AshForwardSpec {
  int classes, h, w;       // probability map extents
  int embed_channels;      // embed conv output channels
  int feature_channels;    // head conv output channels
  int pool_factor;
  double eps_smooth;
};

double head_l1(const AshForwardSpec& spec, const std::vector<double>& prob,
               const std::vector<double>& embed_w, const std::vector<double>& embed_b,
               const std::vector<double>& head_w, const std::vector<double>& head_b);

}  // namespace oracle
