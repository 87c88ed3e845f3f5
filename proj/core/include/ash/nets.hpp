#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "ash/optim.hpp"
#include "ash/tensor.hpp"

namespace ash {

struct Conv2dLayer {
  Tensor weight;  // [C_out, C_in, k, k]
  Tensor bias;    // [C_out]
  int stride = 1;
  int pad = 1;

  Tensor operator()(const Tensor& x) const;
  void collect(std::vector<NamedParam>& out, const std::string& prefix) const;
};

/// He-initialized conv layer; deterministic given the rng state.
Conv2dLayer conv_layer(int c_in, int c_out, int k, int stride, int pad,
                       std::mt19937_64& rng);

/// Three-layer conv encoder (widths 3 -> 16 -> 32 -> 64, two stride-2 stages,
/// output H/4 x W/4) and its upsample+conv mirror ending in a sigmoid. Used
/// as a fixed stylization codec once pretrained and frozen.
class EncoderDecoder {
 public:
  explicit EncoderDecoder(uint64_t seed);

  /// [3,H,W] in [0,1], H and W divisible by 4 -> [64,H/4,W/4].
  Tensor encode(const Tensor& image) const;
  /// Inverse direction; output squashed into [0,1].
  Tensor decode(const Tensor& features) const;

  void freeze();
  bool frozen() const { return frozen_; }
  std::vector<NamedParam> named_params() const;

  static constexpr int kFeatureChannels = 64;
  static constexpr int kSpatialFactor = 4;

 private:
  Conv2dLayer e1_, e2_, e3_, d1_, d2_, d3_;
  bool frozen_ = false;
};

/// Full-resolution conv stack (three 3x3 layers then a 1x1 projection to C
/// classes), an upsample-to-input-resolution head and a channel softmax.
class SegNet {
 public:
  SegNet(int num_classes, uint64_t seed);

  /// [3,H,W] -> per-pixel class distribution [C,H,W].
  Tensor operator()(const Tensor& image) const;

  int num_classes() const { return num_classes_; }
  std::vector<NamedParam> named_params() const;

 private:
  Conv2dLayer c1_, c2_, c3_, head_;
  int num_classes_;
};

/// Fully convolutional score head over probability maps: four stride-2 convs
/// with leaky-relu 0.2, a final 1-channel map squashed by a sigmoid.
class Discriminator {
 public:
  Discriminator(int num_classes, uint64_t seed);

  /// [C,H,W] probability map -> [1,H/16,W/16] scores in (0,1).
  Tensor operator()(const Tensor& prob) const;

  std::vector<NamedParam> named_params() const;

 private:
  Conv2dLayer c1_, c2_, c3_, c4_;
};

struct PretrainConfig {
  int iterations = 3000;
  double lr = 1e-3;
  uint64_t seed = 1;
  // Scale of the stylization objectives relative to reconstruction.
  double stylization_weight = 0.1;
};

/// Trains the codec on reconstruction plus stylization objectives (content
/// and style consistency of decoded re-stylized features over random
/// content/style pairs drawn from `images`), then freezes it.
/// Warns on stderr if the loss fails to decrease over the first 100
/// iterations.
EncoderDecoder pretrain_autoencoder(const std::vector<Tensor>& images,
                                    const PretrainConfig& config);

/// Mean absolute reconstruction error of decode(encode(img)) over a set.
double reconstruction_mae(const EncoderDecoder& codec, const std::vector<Tensor>& images);

}  // namespace ash
