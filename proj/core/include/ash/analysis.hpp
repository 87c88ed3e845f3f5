#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ash/checkpoint.hpp"
#include "ash/hallucination.hpp"
#include "ash/synth.hpp"

namespace ash {

/// Fall in L1 norm of the conditioner outputs after zeroing one class
/// channel of the probability map (no renormalization), reported for the
/// scale and shift heads separately.
struct ClassContribution {
  double d_gamma = 0.0;
  double d_beta = 0.0;
};

ClassContribution class_contribution(const Tensor& prob, const AshModule& module,
                                     const Shape& style_shape, int cls,
                                     double eps_smooth = 0.1);

inline constexpr const char* kTraceHeader =
    "iteration,class,pixels,dL1_gamma,dL1_beta,dL1_gamma_norm,dL1_beta_norm";

/// Appends one CSV row per class: raw contributions, predicted pixel counts
/// and pixel-normalized contributions (0 for classes with no predicted
/// pixels).
void append_trace_rows(std::string& csv, int64_t iteration, const Tensor& prob,
                       const AshModule& module, const Shape& style_shape,
                       double eps_smooth = 0.1);

/// Replays a sequence of training checkpoints against a fixed sample and
/// returns the full trace CSV (header + rows).
std::string trace_coeffs(const std::vector<std::filesystem::path>& checkpoints,
                         const SceneSample& sample, double eps_smooth = 0.1);

// Minimal CSV helpers shared by the trace/metrics tooling.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

struct ChartSeries {
  std::string label;
  std::vector<double> x, y;
};

/// Dependency-free SVG line chart; a pure function of its inputs, so
/// regenerating from the same CSV yields identical bytes.
std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::vector<ChartSeries>& series,
                           int width = 720, int height = 400);

/// Loss curves from a metrics CSV (iteration,seg_loss,adv_loss,ash_loss,disc_loss).
std::string svg_from_metrics_csv(const std::string& csv);
/// Raw contribution curves per class from a coefficient trace CSV.
std::string svg_from_trace_csv(const std::string& csv, bool normalized);

}  // namespace ash
