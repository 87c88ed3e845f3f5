#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ash/tensor.hpp"

namespace ash {

inline constexpr int kNumClasses = 6;
inline constexpr int kSky = 0, kRoad = 1, kBuilding = 2, kPole = 3, kSign = 4,
                     kVegetation = 5;
extern const std::array<const char*, kNumClasses> kClassNames;

enum class TextureKind { kFlat, kNoise, kStripes };

struct ClassAppearance {
  std::array<double, 3> color;  // base RGB in [0,1]
  TextureKind texture = TextureKind::kFlat;
  double amplitude = 0.0;
};

/// Procedural scene family: appearance per class, a global hue rotation and
/// the layout parameter ranges. Scenes drawn from the same layout ranges but
/// different appearances form a domain pair with a controlled gap.
struct DomainSpec {
  int image_size = 48;
  std::array<ClassAppearance, kNumClasses> appearance;
  double hue_shift = 0.0;  // radians about the gray axis

  double sky_frac_min = 0.26, sky_frac_max = 0.34;
  double ground_frac = 0.45;  // bottom fraction holding the road trapezoid
  int buildings_min = 1, buildings_max = 3;
  int poles_min = 0, poles_max = 4;
  int signs_min = 0, signs_max = 3;
};

DomainSpec source_domain(int image_size = 48);
/// Source layout with rotated hue, permuted texture kinds and amplified
/// textures; severity in [0,1] scales the gap.
DomainSpec target_domain(int image_size = 48, double severity = 1.0);

struct SceneSample {
  Tensor image;             // [3,H,W] in [0,1]
  std::vector<int> labels;  // H*W class indices, row-major
  int size = 0;
};

/// Deterministic scene draw: sky band, road trapezoid, buildings, thin poles,
/// small signs, vegetation elsewhere. Labels partition the pixels.
SceneSample gen_scene(const DomainSpec& spec, uint64_t seed);

/// Deterministic abstract style texture (gradient, stripes, value-noise or
/// checker with a random palette).
Tensor gen_style(uint64_t seed, int image_size = 48);

struct MetricsRecord {
  std::array<double, kNumClasses> iou;     // NaN marks "absent from ground truth"
  std::array<bool, kNumClasses> present;   // ground-truth presence
  double miou = 0.0;                       // mean over present classes
};

std::vector<int> argmax_classes(const Tensor& prob);  // ties -> lowest index

void accumulate_confusion(std::vector<int64_t>& confusion,
                          std::span<const int> ground_truth,
                          std::span<const int> predicted);
MetricsRecord metrics_from_confusion(const std::vector<int64_t>& confusion);

using SegmentFn = std::function<Tensor(const SceneSample&)>;

/// Confusion-matrix IoU over n freshly drawn scenes.
MetricsRecord evaluate(const SegmentFn& segment, const DomainSpec& spec, int n,
                       uint64_t seed);

// Binary P6 / P5 containers, 8-bit.
void write_ppm(const std::filesystem::path& path, const Tensor& image);
void write_pgm(const std::filesystem::path& path, std::span<const int> labels,
               int h, int w);

}  // namespace ash
