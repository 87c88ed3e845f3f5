#pragma once

#include <span>

#include "ash/tensor.hpp"

namespace ash {

// Elementwise, same shape on both sides.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);

Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
/// Gradient is passed through inside (lo, hi) and zero where the value was
/// clamped.
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// Per-channel spatial mean of a [C,H,W] tensor -> [C].
Tensor channel_mean(const Tensor& a);
/// Broadcast a [C] vector over an HxW grid -> [C,H,W].
Tensor expand_channels(const Tensor& v, int h, int w);

/// Cross-correlation with zero padding.
/// input [C_in,H,W], weight [C_out,C_in,k,k], bias [C_out] -> [C_out,H',W']
/// with H' = (H + 2*pad - k)/stride + 1, which must be a positive integer.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int pad);

/// Mean over non-overlapping factor x factor blocks; factor must divide both
/// spatial extents.
Tensor avg_pool(const Tensor& a, int factor);
Tensor nearest_upsample(const Tensor& a, int factor);

/// Treats each spatial site of f [C,H,W] as a length-C vector and multiplies
/// it by Q [C,C].
Tensor matmul_channels(const Tensor& q, const Tensor& f);

/// Numerically stable softmax over the channel axis of [C,H,W].
Tensor softmax_channels(const Tensor& a);

/// Mean over non-ignored pixels of -log(prob[label]); prob is [C,H,W],
/// labels is H*W class indices (row-major) with `ignore_value` skipped.
/// Probabilities are clamped to [1e-12, 1] before the log.
Tensor nll_pixelwise(const Tensor& prob, std::span<const int> labels,
                     int ignore_value = 255);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return add_scalar(a, -s); }
inline Tensor operator*(const Tensor& a, double s) { return mul_scalar(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }
inline Tensor operator-(const Tensor& a) { return mul_scalar(a, -1.0); }

}  // namespace ash
