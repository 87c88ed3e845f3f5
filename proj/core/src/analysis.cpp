#include "ash/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "ash/ops.hpp"

namespace ash {

namespace {

double l1_norm(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += std::fabs(v);
  return s;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

ClassContribution class_contribution(const Tensor& prob, const AshModule& module,
                                     const Shape& style_shape, int cls,
                                     double eps_smooth) {
  if (cls < 0 || cls >= prob.dim(0)) {
    throw std::out_of_range("class_contribution: class " + std::to_string(cls) +
                            " outside [0," + std::to_string(prob.dim(0)) + ")");
  }
  NoGradGuard ng;
  StyleParams full = ash_params(prob, module, style_shape, eps_smooth);

  // Zero the class channel of the raw map without renormalizing, so the other
  // channels' inputs stay untouched and the attribution is isolated.
  Tensor zeroed = prob.detach();
  const int hw = prob.dim(1) * prob.dim(2);
  std::fill_n(zeroed.raw().begin() + static_cast<size_t>(cls) * hw, hw, 0.0);
  StyleParams dropped = ash_params(zeroed, module, style_shape, eps_smooth);

  return {l1_norm(full.gamma) - l1_norm(dropped.gamma),
          l1_norm(full.beta) - l1_norm(dropped.beta)};
}

void append_trace_rows(std::string& csv, int64_t iteration, const Tensor& prob,
                       const AshModule& module, const Shape& style_shape,
                       double eps_smooth) {
  const int classes = prob.dim(0);
  std::vector<int> pred = argmax_classes(prob);
  std::vector<int64_t> pixels(classes, 0);
  for (int p : pred) ++pixels[p];

  for (int c = 0; c < classes; ++c) {
    ClassContribution contrib = class_contribution(prob, module, style_shape, c, eps_smooth);
    const double norm_g = pixels[c] > 0 ? contrib.d_gamma / static_cast<double>(pixels[c]) : 0.0;
    const double norm_b = pixels[c] > 0 ? contrib.d_beta / static_cast<double>(pixels[c]) : 0.0;
    csv += std::to_string(iteration);
    csv += ',';
    csv += std::to_string(c);
    csv += ',';
    csv += std::to_string(pixels[c]);
    csv += ',';
    csv += fmt(contrib.d_gamma);
    csv += ',';
    csv += fmt(contrib.d_beta);
    csv += ',';
    csv += fmt(norm_g);
    csv += ',';
    csv += fmt(norm_b);
    csv += '\n';
  }
}

std::string trace_coeffs(const std::vector<std::filesystem::path>& checkpoints,
                         const SceneSample& sample, double eps_smooth) {
  std::string csv = std::string(kTraceHeader) + "\n";
  for (const auto& path : checkpoints) {
    Checkpoint ckpt = Checkpoint::load(path);
    const auto iter_meta = ckpt.get_meta("iteration");
    if (!iter_meta) throw std::runtime_error("trace_coeffs: checkpoint lacks iteration meta: " + path.string());
    const auto classes_meta = ckpt.get_meta("num_classes");
    const int classes = classes_meta ? std::stoi(*classes_meta) : kNumClasses;
    const auto seed_meta = ckpt.get_meta("seed");
    const uint64_t seed = seed_meta ? std::stoull(*seed_meta) : 0;

    SegNet segnet(classes, seed);
    AshModule module(classes, EncoderDecoder::kFeatureChannels, seed);
    auto seg_params = segnet.named_params();
    auto ash_params_list = module.named_params();
    checkpoint_load_params(ckpt, seg_params);
    checkpoint_load_params(ckpt, ash_params_list);

    NoGradGuard ng;
    Tensor prob = segnet(sample.image);
    const Shape style_shape = {EncoderDecoder::kFeatureChannels,
                               sample.size / EncoderDecoder::kSpatialFactor,
                               sample.size / EncoderDecoder::kSpatialFactor};
    append_trace_rows(csv, std::stoll(*iter_meta), prob, module, style_shape, eps_smooth);
  }
  return csv;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    rows.push_back(std::move(fields));
  }
  return rows;
}

namespace {

const char* kPalette[8] = {"#4477aa", "#ee6677", "#228833", "#ccbb44",
                           "#66ccee", "#aa3377", "#bbbbbb", "#222222"};

}  // namespace

std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::vector<ChartSeries>& series, int width,
                           int height) {
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& s : series) {
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        xmin = xmax = s.x[i];
        ymin = ymax = s.y[i];
        first = false;
      }
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double ml = 60, mr = 140, mt = 34, mb = 40;
  const double pw = width - ml - mr, ph = height - mt - mb;
  auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

  std::string svg;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                "viewBox=\"0 0 %d %d\" font-family=\"monospace\" font-size=\"11\">\n",
                width, height, width, height);
  svg += buf;
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof(buf), "<text x=\"%g\" y=\"18\" font-size=\"13\">", ml);
  svg += buf;
  svg += title + "</text>\n";
  std::snprintf(buf, sizeof(buf),
                "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" stroke=\"#888\"/>\n",
                ml, mt, pw, ph);
  svg += buf;
  // Axis extents.
  std::snprintf(buf, sizeof(buf), "<text x=\"%g\" y=\"%g\" text-anchor=\"end\">%.6g</text>\n",
                ml - 4, mt + 10, ymax);
  svg += buf;
  std::snprintf(buf, sizeof(buf), "<text x=\"%g\" y=\"%g\" text-anchor=\"end\">%.6g</text>\n",
                ml - 4, mt + ph, ymin);
  svg += buf;
  std::snprintf(buf, sizeof(buf), "<text x=\"%g\" y=\"%g\">%.6g</text>\n", ml, mt + ph + 14, xmin);
  svg += buf;
  std::snprintf(buf, sizeof(buf), "<text x=\"%g\" y=\"%g\" text-anchor=\"end\">%.6g</text>\n",
                ml + pw, mt + ph + 14, xmax);
  svg += buf;
  std::snprintf(buf, sizeof(buf), "<text x=\"%g\" y=\"%g\">%s</text>\n", ml + pw / 2 - 30,
                mt + ph + 28, x_label.c_str());
  svg += buf;

  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % 8];
    svg += "<polyline fill=\"none\" stroke=\"";
    svg += color;
    svg += "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < s.x.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", sx(s.x[i]), sy(s.y[i]));
      svg += buf;
    }
    svg += "\"/>\n";
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%g\" y=\"%g\" fill=\"%s\">%s</text>\n", ml + pw + 8,
                  mt + 14 + 16.0 * static_cast<double>(si), color, s.label.c_str());
    svg += buf;
  }
  svg += "</svg>\n";
  return svg;
}

std::string svg_from_metrics_csv(const std::string& csv) {
  auto rows = parse_csv(csv);
  std::vector<ChartSeries> series(4);
  const char* names[4] = {"seg_loss", "adv_loss", "ash_loss", "disc_loss"};
  for (int i = 0; i < 4; ++i) series[i].label = names[i];
  for (size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() < 5) continue;
    const double it = std::stod(rows[r][0]);
    for (int i = 0; i < 4; ++i) {
      series[i].x.push_back(it);
      series[i].y.push_back(std::stod(rows[r][1 + i]));
    }
  }
  return svg_line_chart("training losses", "iteration", series);
}

std::string svg_from_trace_csv(const std::string& csv, bool normalized) {
  auto rows = parse_csv(csv);
  std::vector<ChartSeries> gamma(kNumClasses), beta(kNumClasses);
  for (int c = 0; c < kNumClasses; ++c) {
    gamma[c].label = std::string(kClassNames[c]) + " scale";
    beta[c].label = std::string(kClassNames[c]) + " shift";
  }
  const size_t col_g = normalized ? 5 : 3;
  const size_t col_b = normalized ? 6 : 4;
  for (size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() < 7) continue;
    const double it = std::stod(rows[r][0]);
    const int c = std::stoi(rows[r][1]);
    if (c < 0 || c >= kNumClasses) continue;
    gamma[c].x.push_back(it);
    gamma[c].y.push_back(std::stod(rows[r][col_g]));
    beta[c].x.push_back(it);
    beta[c].y.push_back(std::stod(rows[r][col_b]));
  }
  std::vector<ChartSeries> all;
  all.insert(all.end(), gamma.begin(), gamma.end());
  all.insert(all.end(), beta.begin(), beta.end());
  return svg_line_chart(normalized ? "per-class contributions (pixel-normalized)"
                                   : "per-class contributions (raw)",
                        "iteration", all, 760, 460);
}

}  // namespace ash
