#pragma once

#include <cstdint>

#include "ash/nets.hpp"
#include "ash/tensor.hpp"

namespace ash {

/// Mix a probability map with the uniform distribution:
/// p' = (1-eps)*p + eps/C. eps must lie in [0, 1).
Tensor smooth_labels(const Tensor& prob, double eps);

/// Constant map with 1/C in every channel at every pixel.
Tensor uniform_probability_map(int num_classes, int h, int w);

/// Per-location scale and shift for the style features, both shaped like the
/// style feature map.
struct StyleParams {
  Tensor gamma;
  Tensor beta;
};

/// Semantic conditioner: a class-probability embedding conv followed by
/// scale/shift head convs. The heads start as weight 0 with bias +1 / -1, so
/// a fresh module is exactly the identity perturbation.
class AshModule {
 public:
  AshModule(int num_classes, int feature_channels, uint64_t seed);

  int num_classes() const { return num_classes_; }
  int feature_channels() const { return feature_channels_; }
  std::vector<NamedParam> named_params() const;

  const Conv2dLayer& embed() const { return embed_; }
  const Conv2dLayer& gamma_head() const { return gamma_head_; }
  const Conv2dLayer& beta_head() const { return beta_head_; }

  static constexpr int kEmbedChannels = 32;

 private:
  Conv2dLayer embed_, gamma_head_, beta_head_;
  int num_classes_;
  int feature_channels_;
};

/// Label-smooths the probability map, average-pools it onto the style grid
/// and runs the conditioner convs. style_shape is (C_f, h, w); the pooling
/// factor H/h must be an integer.
StyleParams ash_params(const Tensor& prob, const AshModule& module,
                       const Shape& style_shape, double eps_smooth = 0.1);

/// f' = gamma * (f_style + 1) + beta, element-wise.
Tensor perturb_style(const Tensor& f_style, const StyleParams& params);

struct HallucinateOptions {
  bool apply_noise = true;        // rotate style features by a seeded orthogonal matrix
  bool uniform_semantics = false; // condition on the uniform map instead of the prediction
  double eps_smooth = 0.1;
};

struct HallucinateResult {
  Tensor x_stylized;          // decoded stylized source image [3,H,W]
  Tensor f_src;               // source features (constant, no graph)
  Tensor f_style_perturbed;   // conditioned style features
  Tensor merged;              // adain(f_src, f_style_perturbed); x_stylized's graph input
  Tensor prob_src;            // conditioning probability map (detached)
};

/// One stylized-sample synthesis pass: encode source and style, optionally
/// rotate the style features, condition them on the (smoothed) segmentation
/// output and decode the AdaIN merge. Only the conditioner path carries
/// gradients; encoder outputs and the probability map enter as constants.
HallucinateResult hallucinate(const Tensor& x_src, const Tensor& x_style,
                              const SegNet& segnet, const AshModule& module,
                              const EncoderDecoder& codec, uint64_t noise_seed,
                              const HallucinateOptions& opts = {});

/// Conditioner objective:
///   -adv + L_c(f_src, merged) + L_s(f', merged) + max(0, margin - L_s(f_src, merged))
/// The last term hinges the repelled style distance; without the hinge the
/// objective is unbounded below.
Tensor ash_loss(const Tensor& adv, const Tensor& f_src, const Tensor& f_style_perturbed,
                const Tensor& merged, double hinge_margin = 10.0);

}  // namespace ash
