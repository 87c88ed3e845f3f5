#include "ash/nets.hpp"

#include <cmath>
#include <iostream>

#include "ash/ops.hpp"
#include "ash/rng.hpp"
#include "ash/stylization.hpp"

namespace ash {

Tensor Conv2dLayer::operator()(const Tensor& x) const {
  return conv2d(x, weight, bias, stride, pad);
}

void Conv2dLayer::collect(std::vector<NamedParam>& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

Conv2dLayer conv_layer(int c_in, int c_out, int k, int stride, int pad,
                       std::mt19937_64& rng) {
  const double stddev = std::sqrt(2.0 / (static_cast<double>(c_in) * k * k));
  std::vector<double> w(static_cast<size_t>(c_out) * c_in * k * k);
  for (auto& v : w) v = gaussian(rng, 0.0, stddev);
  Conv2dLayer layer;
  layer.weight = Tensor::from_data({c_out, c_in, k, k}, std::move(w), /*requires_grad=*/true);
  layer.bias = Tensor::zeros({c_out}, /*requires_grad=*/true);
  layer.stride = stride;
  layer.pad = pad;
  return layer;
}

EncoderDecoder::EncoderDecoder(uint64_t seed) {
  auto rng = make_rng(seed, "init:encdec");
  e1_ = conv_layer(3, 16, 3, 1, 1, rng);
  e2_ = conv_layer(16, 32, 4, 2, 1, rng);
  e3_ = conv_layer(32, 64, 4, 2, 1, rng);
  d1_ = conv_layer(64, 32, 3, 1, 1, rng);
  d2_ = conv_layer(32, 16, 3, 1, 1, rng);
  d3_ = conv_layer(16, 3, 3, 1, 1, rng);
}

Tensor EncoderDecoder::encode(const Tensor& image) const {
  if (image.shape().size() != 3 || image.dim(0) != 3) {
    throw ShapeError("encode: expected [3,H,W], got " + shape_str(image.shape()));
  }
  if (image.dim(1) % kSpatialFactor != 0) {
    throw ShapeError("encode: axis 1 extent " + std::to_string(image.dim(1)) +
                     " not divisible by " + std::to_string(kSpatialFactor));
  }
  if (image.dim(2) % kSpatialFactor != 0) {
    throw ShapeError("encode: axis 2 extent " + std::to_string(image.dim(2)) +
                     " not divisible by " + std::to_string(kSpatialFactor));
  }
  for (double v : image.values()) {
    if (v < -0.01 || v > 1.01) {
      throw std::invalid_argument("encode: pixel values must lie in [0,1]");
    }
  }
  Tensor h = relu(e1_(image));
  h = relu(e2_(h));
  return relu(e3_(h));
}

Tensor EncoderDecoder::decode(const Tensor& features) const {
  if (features.shape().size() != 3 || features.dim(0) != kFeatureChannels) {
    throw ShapeError("decode: expected [" + std::to_string(kFeatureChannels) +
                     ",h,w], got " + shape_str(features.shape()));
  }
  Tensor h = relu(d1_(nearest_upsample(features, 2)));
  h = relu(d2_(nearest_upsample(h, 2)));
  return sigmoid(d3_(h));
}

void EncoderDecoder::freeze() {
  for (auto& p : named_params()) p.tensor.set_requires_grad(false);
  frozen_ = true;
}

std::vector<NamedParam> EncoderDecoder::named_params() const {
  std::vector<NamedParam> out;
  e1_.collect(out, "encdec.e1");
  e2_.collect(out, "encdec.e2");
  e3_.collect(out, "encdec.e3");
  d1_.collect(out, "encdec.d1");
  d2_.collect(out, "encdec.d2");
  d3_.collect(out, "encdec.d3");
  return out;
}

SegNet::SegNet(int num_classes, uint64_t seed) : num_classes_(num_classes) {
  auto rng = make_rng(seed, "init:segnet");
  c1_ = conv_layer(3, 16, 3, 1, 1, rng);
  c2_ = conv_layer(16, 16, 3, 1, 1, rng);
  c3_ = conv_layer(16, 16, 3, 1, 1, rng);
  head_ = conv_layer(16, num_classes, 1, 1, 0, rng);
}

Tensor SegNet::operator()(const Tensor& image) const {
  if (image.shape().size() != 3 || image.dim(0) != 3) {
    throw ShapeError("segment: expected [3,H,W], got " + shape_str(image.shape()));
  }
  Tensor h = relu(c1_(image));
  h = relu(c2_(h));
  h = relu(c3_(h));
  Tensor logits = head_(h);
  const int factor = image.dim(1) / logits.dim(1);
  if (factor > 1) logits = nearest_upsample(logits, factor);
  return softmax_channels(logits);
}

std::vector<NamedParam> SegNet::named_params() const {
  std::vector<NamedParam> out;
  c1_.collect(out, "segnet.c1");
  c2_.collect(out, "segnet.c2");
  c3_.collect(out, "segnet.c3");
  head_.collect(out, "segnet.head");
  return out;
}

Discriminator::Discriminator(int num_classes, uint64_t seed) {
  auto rng = make_rng(seed, "init:disc");
  c1_ = conv_layer(num_classes, 16, 4, 2, 1, rng);
  c2_ = conv_layer(16, 32, 4, 2, 1, rng);
  c3_ = conv_layer(32, 64, 4, 2, 1, rng);
  c4_ = conv_layer(64, 1, 4, 2, 1, rng);
}

Tensor Discriminator::operator()(const Tensor& prob) const {
  constexpr double kSlope = 0.2;
  Tensor h = leaky_relu(c1_(prob), kSlope);
  h = leaky_relu(c2_(h), kSlope);
  h = leaky_relu(c3_(h), kSlope);
  return sigmoid(c4_(h));
}

std::vector<NamedParam> Discriminator::named_params() const {
  std::vector<NamedParam> out;
  c1_.collect(out, "disc.c1");
  c2_.collect(out, "disc.c2");
  c3_.collect(out, "disc.c3");
  c4_.collect(out, "disc.c4");
  return out;
}

EncoderDecoder pretrain_autoencoder(const std::vector<Tensor>& images,
                                    const PretrainConfig& config) {
  if (images.size() < 2) {
    throw std::invalid_argument("pretrain_autoencoder: need at least 2 images");
  }
  EncoderDecoder codec(config.seed);
  Adam opt(codec.named_params(), config.lr);
  auto rng = make_rng(config.seed, "pretrain:order");

  double first_half = 0.0, second_half = 0.0;
  for (int iter = 0; iter < config.iterations; ++iter) {
    const Tensor& img = images[uniform_int(rng, 0, static_cast<int>(images.size()) - 1)];
    const Tensor& style = images[uniform_int(rng, 0, static_cast<int>(images.size()) - 1)];

    Tensor recon = codec.decode(codec.encode(img));
    Tensor d = recon - img;
    Tensor loss = mean(d * d);

    // Stylization objective: decoded AdaIN output should re-encode to the
    // merged features (content) and carry the style statistics.
    Tensor f_c = codec.encode(img);
    Tensor f_s = codec.encode(style);
    Tensor merged = adain(f_c, f_s);
    Tensor out = codec.decode(merged);
    Tensor f_out = codec.encode(out);
    const double inv_numel = 1.0 / static_cast<double>(merged.size());
    const double inv_c = 1.0 / static_cast<double>(merged.dim(0));
    loss = loss + config.stylization_weight *
                      (content_loss(f_out, merged) * inv_numel +
                       style_loss(f_out, f_s) * inv_c);

    const double lv = loss.value();
    if (!std::isfinite(lv)) {
      throw std::runtime_error("pretrain_autoencoder: non-finite loss at iteration " +
                               std::to_string(iter));
    }
    if (iter < 50)
      first_half += lv;
    else if (iter < 100)
      second_half += lv;
    if (iter == 100 && second_half >= first_half) {
      std::cerr << "warning: pretrain loss not decreasing over the first 100 iterations\n";
    }

    loss.backward();
    opt.step();
    opt.zero_grad();
  }
  codec.freeze();
  return codec;
}

double reconstruction_mae(const EncoderDecoder& codec, const std::vector<Tensor>& images) {
  if (images.empty()) throw std::invalid_argument("reconstruction_mae: empty set");
  NoGradGuard ng;
  double total = 0.0;
  int64_t count = 0;
  for (const Tensor& img : images) {
    Tensor recon = codec.decode(codec.encode(img));
    const auto& a = recon.values();
    const auto& b = img.values();
    for (size_t i = 0; i < a.size(); ++i) total += std::fabs(a[i] - b[i]);
    count += static_cast<int64_t>(a.size());
  }
  return total / static_cast<double>(count);
}

}  // namespace ash
