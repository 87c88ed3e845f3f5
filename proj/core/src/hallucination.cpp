#include "ash/hallucination.hpp"

#include <algorithm>

#include "ash/ops.hpp"
#include "ash/rng.hpp"
#include "ash/stylization.hpp"

namespace ash {

Tensor smooth_labels(const Tensor& prob, double eps) {
  if (prob.shape().size() != 3) {
    throw ShapeError("smooth_labels: expected [C,H,W], got " + shape_str(prob.shape()));
  }
  if (!(eps >= 0.0 && eps < 1.0)) {
    throw std::invalid_argument("smooth_labels: eps must lie in [0, 1)");
  }
  const int c = prob.dim(0);
  return mul_scalar(prob, 1.0 - eps) + eps / static_cast<double>(c);
}

Tensor uniform_probability_map(int num_classes, int h, int w) {
  return Tensor::full({num_classes, h, w}, 1.0 / static_cast<double>(num_classes));
}

AshModule::AshModule(int num_classes, int feature_channels, uint64_t seed)
    : num_classes_(num_classes), feature_channels_(feature_channels) {
  auto rng = make_rng(seed, "init:ash");
  embed_ = conv_layer(num_classes, kEmbedChannels, 3, 1, 1, rng);
  gamma_head_ = conv_layer(kEmbedChannels, feature_channels, 3, 1, 1, rng);
  beta_head_ = conv_layer(kEmbedChannels, feature_channels, 3, 1, 1, rng);
  // Identity start: gamma == 1 and beta == -1 everywhere, so the perturbation
  // gamma*(f+1)+beta reduces to f until training moves the heads.
  std::fill(gamma_head_.weight.raw().begin(), gamma_head_.weight.raw().end(), 0.0);
  std::fill(gamma_head_.bias.raw().begin(), gamma_head_.bias.raw().end(), 1.0);
  std::fill(beta_head_.weight.raw().begin(), beta_head_.weight.raw().end(), 0.0);
  std::fill(beta_head_.bias.raw().begin(), beta_head_.bias.raw().end(), -1.0);
}

std::vector<NamedParam> AshModule::named_params() const {
  std::vector<NamedParam> out;
  embed_.collect(out, "ash.embed");
  gamma_head_.collect(out, "ash.gamma");
  beta_head_.collect(out, "ash.beta");
  return out;
}

StyleParams ash_params(const Tensor& prob, const AshModule& module,
                       const Shape& style_shape, double eps_smooth) {
  if (prob.shape().size() != 3) {
    throw ShapeError("ash_params: expected [C,H,W] probability map, got " + shape_str(prob.shape()));
  }
  if (prob.dim(0) != module.num_classes()) {
    throw ShapeError("ash_params: probability map channel axis 0 is " + std::to_string(prob.dim(0)) +
                     " but the module expects " + std::to_string(module.num_classes()));
  }
  if (style_shape.size() != 3 || style_shape[0] != module.feature_channels()) {
    throw ShapeError("ash_params: style_shape must be [" + std::to_string(module.feature_channels()) +
                     ",h,w], got " + shape_str(style_shape));
  }
  const int h = style_shape[1], w = style_shape[2];
  if (prob.dim(1) % h != 0 || prob.dim(2) % w != 0 ||
      prob.dim(1) / h != prob.dim(2) / w) {
    throw ShapeError("ash_params: probability map " + shape_str(prob.shape()) +
                     " does not pool integrally onto style grid " + shape_str(style_shape));
  }
  const int factor = prob.dim(1) / h;
  Tensor pooled = avg_pool(smooth_labels(prob, eps_smooth), factor);
  Tensor e = relu(module.embed()(pooled));
  return {module.gamma_head()(e), module.beta_head()(e)};
}

Tensor perturb_style(const Tensor& f_style, const StyleParams& params) {
  check_same_shape("perturb_style", f_style, params.gamma);
  check_same_shape("perturb_style", params.gamma, params.beta);
  return mul(params.gamma, add_scalar(f_style, 1.0)) + params.beta;
}

HallucinateResult hallucinate(const Tensor& x_src, const Tensor& x_style,
                              const SegNet& segnet, const AshModule& module,
                              const EncoderDecoder& codec, uint64_t noise_seed,
                              const HallucinateOptions& opts) {
  Tensor f_src, f_sty, prob;
  {
    NoGradGuard ng;
    f_src = codec.encode(x_src);
    f_sty = codec.encode(x_style);
    if (opts.apply_noise) f_sty = orthogonal_noise(f_sty, noise_seed);
    prob = opts.uniform_semantics
               ? uniform_probability_map(segnet.num_classes(), x_src.dim(1), x_src.dim(2))
               : segnet(x_src);
  }
  StyleParams params = ash_params(prob, module, f_sty.shape(), opts.eps_smooth);
  Tensor f_prime = perturb_style(f_sty, params);
  Tensor merged = adain(f_src, f_prime);
  Tensor x_stylized = codec.decode(merged);
  return {x_stylized, f_src, f_prime, merged, prob};
}

Tensor ash_loss(const Tensor& adv, const Tensor& f_src, const Tensor& f_style_perturbed,
                const Tensor& merged, double hinge_margin) {
  ContentStyleLosses losses = content_style_losses(f_src, f_style_perturbed, merged);
  Tensor hinge = relu(-losses.style_source + hinge_margin);
  return -adv + losses.content + losses.style_style + hinge;
}

}  // namespace ash
