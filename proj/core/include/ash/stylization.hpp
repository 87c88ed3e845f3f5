#pragma once

#include <cstdint>

#include "ash/tensor.hpp"

namespace ash {

/// Per-channel mean and standard deviation over all spatial sites.
/// Population variance, stabilized as sigma = sqrt(var + 1e-8) so constant
/// channels stay divisible.
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> std;
};

ChannelStats channel_stats(const Tensor& f);

/// Differentiable per-channel (mean, sigma) pair as graph tensors, shape [C]
/// each. Shared by adain and the style loss.
struct ChannelStatsT {
  Tensor mean;
  Tensor std;
};

ChannelStatsT channel_stats_t(const Tensor& f);

/// Re-normalizes the channelwise statistics of the content features to match
/// the style features: sigma(f_s) * (f_c - mu(f_c)) / sigma(f_c) + mu(f_s).
/// Spatial extents of the two inputs may differ; channel counts must match.
Tensor adain(const Tensor& f_content, const Tensor& f_style);

/// Random orthogonal C x C matrix, a deterministic function of the seed.
/// Gaussian sample orthonormalized by modified Gram-Schmidt with a second
/// re-orthogonalization pass and sign-fixed diagonal.
Tensor sample_orthogonal(int c, uint64_t seed);

/// Rotates every spatial site's channel vector by a seeded random orthogonal
/// matrix. Preserves all pairwise inner products of the channel vectors.
Tensor orthogonal_noise(const Tensor& f_style, uint64_t seed);
/// Test hook: same, with an explicit matrix.
Tensor orthogonal_noise_with(const Tensor& q, const Tensor& f_style);

/// Squared-L2 content distance plus the two stat-space style distances used
/// by the hallucination objective.
///   content_loss(a, b) = sum((a - b)^2), identical shapes required
///   style_loss(a, b)   = sum((mu_a - mu_b)^2) + sum((sigma_a - sigma_b)^2)
Tensor content_loss(const Tensor& a, const Tensor& b);
Tensor style_loss(const Tensor& a, const Tensor& b);

struct ContentStyleLosses {
  Tensor content;        // L_c(f_src, merged)
  Tensor style_style;    // L_s(f_style_perturbed, merged)
  Tensor style_source;   // L_s(f_src, merged)
};

ContentStyleLosses content_style_losses(const Tensor& f_src, const Tensor& f_style,
                                        const Tensor& merged);

}  // namespace ash
