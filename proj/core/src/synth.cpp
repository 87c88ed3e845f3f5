#include "ash/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ash/rng.hpp"

namespace ash {

const std::array<const char*, kNumClasses> kClassNames = {
    "sky", "road", "building", "pole", "sign", "vegetation"};

DomainSpec source_domain(int image_size) {
  DomainSpec spec;
  spec.image_size = image_size;
  spec.appearance[kSky] = {{0.45, 0.66, 0.95}, TextureKind::kFlat, 0.03};
  spec.appearance[kRoad] = {{0.36, 0.36, 0.40}, TextureKind::kNoise, 0.10};
  spec.appearance[kBuilding] = {{0.58, 0.38, 0.28}, TextureKind::kStripes, 0.12};
  spec.appearance[kPole] = {{0.78, 0.76, 0.70}, TextureKind::kFlat, 0.02};
  spec.appearance[kSign] = {{0.90, 0.14, 0.14}, TextureKind::kFlat, 0.02};
  spec.appearance[kVegetation] = {{0.14, 0.48, 0.20}, TextureKind::kNoise, 0.14};
  return spec;
}

DomainSpec target_domain(int image_size, double severity) {
  DomainSpec spec = source_domain(image_size);
  spec.hue_shift = 0.9 * severity;
  for (auto& cls : spec.appearance) {
    switch (cls.texture) {
      case TextureKind::kFlat: cls.texture = TextureKind::kNoise; break;
      case TextureKind::kNoise: cls.texture = TextureKind::kStripes; break;
      case TextureKind::kStripes: cls.texture = TextureKind::kFlat; break;
    }
    cls.amplitude *= 1.0 + 0.5 * severity;
  }
  return spec;
}

namespace {

struct NoiseGrid {
  int cells = 6;
  std::vector<double> values;  // (cells+1)^2

  double at(double u, double v) const {  // u,v in [0,1]
    const double x = u * cells, y = v * cells;
    const int x0 = std::min(static_cast<int>(x), cells - 1);
    const int y0 = std::min(static_cast<int>(y), cells - 1);
    const double fx = x - x0, fy = y - y0;
    auto g = [&](int yy, int xx) { return values[static_cast<size_t>(yy) * (cells + 1) + xx]; };
    const double top = g(y0, x0) * (1 - fx) + g(y0, x0 + 1) * fx;
    const double bot = g(y0 + 1, x0) * (1 - fx) + g(y0 + 1, x0 + 1) * fx;
    return top * (1 - fy) + bot * fy;
  }
};

NoiseGrid make_noise_grid(std::mt19937_64& rng, int cells) {
  NoiseGrid grid;
  grid.cells = cells;
  grid.values.resize(static_cast<size_t>(cells + 1) * (cells + 1));
  for (auto& v : grid.values) v = uniform(rng, 0.0, 1.0);
  return grid;
}

struct StripeField {
  double cs = 1.0, sn = 0.0, period = 8.0, phase = 0.0;

  double at(double x, double y) const {
    return std::sin(2.0 * M_PI * (x * cs + y * sn) / period + phase);
  }
};

StripeField make_stripes(std::mt19937_64& rng) {
  const double theta = uniform(rng, 0.0, M_PI);
  return {std::cos(theta), std::sin(theta), uniform(rng, 3.0, 9.0), uniform(rng, 0.0, 2.0 * M_PI)};
}

// Rotation about the gray axis (1,1,1)/sqrt(3); rows of the matrix.
std::array<std::array<double, 3>, 3> hue_matrix(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  const double a = c + (1.0 - c) / 3.0;
  const double b1 = (1.0 - c) / 3.0 - s / std::sqrt(3.0);
  const double b2 = (1.0 - c) / 3.0 + s / std::sqrt(3.0);
  return {{{a, b1, b2}, {b2, a, b1}, {b1, b2, a}}};
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

void fill_rect(std::vector<int>& labels, int size, int x0, int y0, int x1, int y1, int cls) {
  x0 = std::max(0, x0);
  y0 = std::max(0, y0);
  x1 = std::min(size, x1);
  y1 = std::min(size, y1);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) labels[static_cast<size_t>(y) * size + x] = cls;
}

}  // namespace

SceneSample gen_scene(const DomainSpec& spec, uint64_t seed) {
  const int n = spec.image_size;
  auto rng = make_rng(seed, "scene");
  std::vector<int> labels(static_cast<size_t>(n) * n, kVegetation);

  // Sky band.
  const int sky_h = std::max(1, static_cast<int>(std::lround(
                                n * uniform(rng, spec.sky_frac_min, spec.sky_frac_max))));
  fill_rect(labels, n, 0, 0, n, sky_h, kSky);

  // Road trapezoid over the ground band.
  const int ground_y = n - static_cast<int>(std::lround(n * spec.ground_frac));
  const double cx = n * (0.5 + uniform(rng, -0.08, 0.08));
  const double half_top = n * uniform(rng, 0.12, 0.20);
  const double half_bot = n * uniform(rng, 0.40, 0.50);
  for (int y = ground_y; y < n; ++y) {
    const double t = static_cast<double>(y - ground_y) / std::max(1, n - 1 - ground_y);
    const double hw = half_top + (half_bot - half_top) * t;
    const int x0 = static_cast<int>(std::lround(cx - hw));
    const int x1 = static_cast<int>(std::lround(cx + hw));
    fill_rect(labels, n, x0, y, x1 + 1, y + 1, kRoad);
  }

  // Buildings between skyline and ground.
  const int n_buildings = uniform_int(rng, spec.buildings_min, spec.buildings_max);
  for (int i = 0; i < n_buildings; ++i) {
    const int bw = uniform_int(rng, n / 6, n / 3);
    const int x0 = uniform_int(rng, 0, std::max(0, n - bw));
    const int top = sky_h + uniform_int(rng, -n / 12, n / 8);
    const int bottom = ground_y + uniform_int(rng, 0, n / 12);
    fill_rect(labels, n, x0, std::max(0, top), x0 + bw, bottom, kBuilding);
  }

  // Thin poles rising from the ground band.
  const int n_poles = uniform_int(rng, spec.poles_min, spec.poles_max);
  std::vector<std::pair<int, int>> pole_tops;
  for (int i = 0; i < n_poles; ++i) {
    const int pw = uniform_int(rng, 1, 2);
    const int x0 = uniform_int(rng, 1, n - 3);
    const int base = uniform_int(rng, ground_y, n - 2);
    const int height = uniform_int(rng, n / 4, n / 2);
    const int top = std::max(0, base - height);
    fill_rect(labels, n, x0, top, x0 + pw, base + 1, kPole);
    pole_tops.emplace_back(x0, top);
  }

  // Small signs, attached to pole tops when possible.
  const int n_signs = uniform_int(rng, spec.signs_min, spec.signs_max);
  for (int i = 0; i < n_signs; ++i) {
    const int sw = uniform_int(rng, 3, 5);
    int x0, y0;
    if (!pole_tops.empty() && i < static_cast<int>(pole_tops.size())) {
      x0 = pole_tops[i].first - sw / 2;
      y0 = pole_tops[i].second - uniform_int(rng, 0, 2);
    } else {
      x0 = uniform_int(rng, 0, n - sw);
      y0 = uniform_int(rng, sky_h, n / 2);
    }
    fill_rect(labels, n, x0, y0, x0 + sw, y0 + sw, kSign);
  }

  // Per-class texture fields, drawn in class order after the layout so the
  // stream of random numbers is fixed.
  std::array<NoiseGrid, kNumClasses> noise;
  std::array<StripeField, kNumClasses> stripes;
  for (int c = 0; c < kNumClasses; ++c) {
    switch (spec.appearance[c].texture) {
      case TextureKind::kNoise: noise[c] = make_noise_grid(rng, 6); break;
      case TextureKind::kStripes: stripes[c] = make_stripes(rng); break;
      case TextureKind::kFlat: break;
    }
  }

  const auto hm = hue_matrix(spec.hue_shift);
  std::vector<double> image(static_cast<size_t>(3) * n * n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const int cls = labels[static_cast<size_t>(y) * n + x];
      const ClassAppearance& ap = spec.appearance[cls];
      double delta = 0.0;
      switch (ap.texture) {
        case TextureKind::kFlat: break;
        case TextureKind::kNoise:
          delta = ap.amplitude * (noise[cls].at(static_cast<double>(x) / (n - 1),
                                                static_cast<double>(y) / (n - 1)) - 0.5);
          break;
        case TextureKind::kStripes:
          delta = 0.5 * ap.amplitude * stripes[cls].at(x, y);
          break;
      }
      double rgb[3];
      for (int ch = 0; ch < 3; ++ch) rgb[ch] = ap.color[ch] + delta;
      for (int ch = 0; ch < 3; ++ch) {
        const double v = hm[ch][0] * rgb[0] + hm[ch][1] * rgb[1] + hm[ch][2] * rgb[2];
        image[(static_cast<size_t>(ch) * n + y) * n + x] = clamp01(v);
      }
    }
  }

  SceneSample sample;
  sample.image = Tensor::from_data({3, n, n}, std::move(image));
  sample.labels = std::move(labels);
  sample.size = n;
  return sample;
}

Tensor gen_style(uint64_t seed, int image_size) {
  const int n = image_size;
  auto rng = make_rng(seed, "style");
  std::array<double, 3> c0, c1;
  for (auto& v : c0) v = uniform(rng, 0.0, 1.0);
  for (auto& v : c1) v = uniform(rng, 0.0, 1.0);
  const int kind = uniform_int(rng, 0, 3);

  double gx = 0, gy = 0;
  StripeField stripe;
  NoiseGrid grid;
  int cell = 8;
  switch (kind) {
    case 0: {  // linear gradient
      const double theta = uniform(rng, 0.0, 2.0 * M_PI);
      gx = std::cos(theta);
      gy = std::sin(theta);
      break;
    }
    case 1: stripe = make_stripes(rng); break;
    case 2: grid = make_noise_grid(rng, uniform_int(rng, 3, 7)); break;
    case 3: cell = uniform_int(rng, 4, 12); break;
  }

  std::vector<double> image(static_cast<size_t>(3) * n * n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double t = 0.0;
      switch (kind) {
        case 0: {
          const double proj = (gx * x + gy * y) / n;
          t = clamp01(0.5 + proj);
          break;
        }
        case 1: t = 0.5 + 0.5 * stripe.at(x, y); break;
        case 2:
          t = grid.at(static_cast<double>(x) / (n - 1), static_cast<double>(y) / (n - 1));
          break;
        case 3: t = ((x / cell + y / cell) % 2 == 0) ? 0.0 : 1.0; break;
      }
      for (int ch = 0; ch < 3; ++ch) {
        image[(static_cast<size_t>(ch) * n + y) * n + x] =
            clamp01(c0[ch] * (1.0 - t) + c1[ch] * t);
      }
    }
  }
  return Tensor::from_data({3, n, n}, std::move(image));
}

std::vector<int> argmax_classes(const Tensor& prob) {
  const int c = prob.dim(0), h = prob.dim(1), w = prob.dim(2);
  const int hw = h * w;
  const auto& p = prob.values();
  std::vector<int> out(hw, 0);
  for (int s = 0; s < hw; ++s) {
    double best = p[s];
    int best_c = 0;
    for (int ci = 1; ci < c; ++ci) {
      const double v = p[static_cast<size_t>(ci) * hw + s];
      if (v > best) {  // strict: ties stay with the lowest class index
        best = v;
        best_c = ci;
      }
    }
    out[s] = best_c;
  }
  return out;
}

void accumulate_confusion(std::vector<int64_t>& confusion,
                          std::span<const int> ground_truth,
                          std::span<const int> predicted) {
  if (confusion.size() != static_cast<size_t>(kNumClasses) * kNumClasses) {
    confusion.assign(static_cast<size_t>(kNumClasses) * kNumClasses, 0);
  }
  if (ground_truth.size() != predicted.size()) {
    throw std::invalid_argument("accumulate_confusion: size mismatch");
  }
  for (size_t i = 0; i < ground_truth.size(); ++i) {
    confusion[static_cast<size_t>(ground_truth[i]) * kNumClasses + predicted[i]] += 1;
  }
}

MetricsRecord metrics_from_confusion(const std::vector<int64_t>& confusion) {
  MetricsRecord rec;
  double total = 0.0;
  int n_present = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    int64_t tp = confusion[static_cast<size_t>(c) * kNumClasses + c];
    int64_t gt = 0, pred = 0;
    for (int j = 0; j < kNumClasses; ++j) {
      gt += confusion[static_cast<size_t>(c) * kNumClasses + j];
      pred += confusion[static_cast<size_t>(j) * kNumClasses + c];
    }
    rec.present[c] = gt > 0;
    if (gt > 0) {
      rec.iou[c] = static_cast<double>(tp) / static_cast<double>(gt + pred - tp);
      total += rec.iou[c];
      ++n_present;
    } else {
      rec.iou[c] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  rec.miou = n_present > 0 ? total / n_present : 0.0;
  return rec;
}

MetricsRecord evaluate(const SegmentFn& segment, const DomainSpec& spec, int n,
                       uint64_t seed) {
  if (n < 1) throw std::invalid_argument("evaluate: need n >= 1 scenes");
  std::vector<int64_t> confusion(static_cast<size_t>(kNumClasses) * kNumClasses, 0);
  for (int i = 0; i < n; ++i) {
    SceneSample sample = gen_scene(spec, derive_seed(seed, "eval", static_cast<uint64_t>(i)));
    Tensor prob = segment(sample);
    std::vector<int> pred = argmax_classes(prob);
    accumulate_confusion(confusion, sample.labels, pred);
  }
  return metrics_from_confusion(confusion);
}

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
  if (image.shape().size() != 3 || image.dim(0) != 3) {
    throw ShapeError("write_ppm: expected [3,H,W], got " + shape_str(image.shape()));
  }
  const int h = image.dim(1), w = image.dim(2);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("write_ppm: cannot open " + path.string());
  f << "P6\n" << w << " " << h << "\n255\n";
  const auto& v = image.values();
  std::string bytes;
  bytes.reserve(static_cast<size_t>(3) * h * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        const double val = v[(static_cast<size_t>(ch) * h + y) * w + x];
        const long b = std::lround(std::min(1.0, std::max(0.0, val)) * 255.0);
        bytes.push_back(static_cast<char>(static_cast<unsigned char>(b)));
      }
    }
  }
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void write_pgm(const std::filesystem::path& path, std::span<const int> labels,
               int h, int w) {
  if (static_cast<int>(labels.size()) != h * w) {
    throw std::invalid_argument("write_pgm: label count does not match extents");
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("write_pgm: cannot open " + path.string());
  f << "P5\n" << w << " " << h << "\n255\n";
  std::string bytes;
  bytes.reserve(labels.size());
  for (int lbl : labels) bytes.push_back(static_cast<char>(static_cast<unsigned char>(lbl)));
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace ash
