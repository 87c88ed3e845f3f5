#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "ash/checkpoint.hpp"
#include "ash/hallucination.hpp"
#include "ash/nets.hpp"
#include "ash/synth.hpp"

namespace ash {

/// Knobs for the three-player run. The ablation flags form a monotone chain:
/// ash requires noise, noise requires stylization.
struct TrainConfig {
  int iterations = 5000;
  double lr_seg = 2.5e-4;
  double lr_disc = 1.0e-4;
  double lr_ash = 2.5e-4;
  double momentum = 0.9;
  double eps_smooth = 0.1;
  uint64_t seed = 1;
  int image_size = 48;
  bool stylization = true;
  bool noise = true;
  bool ash = true;
  bool uniform_semantics = false;
  double target_severity = 1.0;
  int log_every = 50;
  int trace_every = 50;
  int checkpoint_every = 0;  // 0: final checkpoint only
  int eval_scenes = 24;

  void validate() const;
  /// Canonical key=value rendering; its hash goes into checkpoint metadata.
  std::string canonical() const;
  uint64_t digest() const;
};

inline constexpr const char* kMetricsHeader =
    "iteration,seg_loss,adv_loss,ash_loss,disc_loss";

/// Mean cross entropy over non-ignored pixels of an already-softmaxed map.
Tensor seg_loss(const Tensor& prob, std::span<const int> labels,
                int ignore_value = 255);

/// Output-level adversarial objective on discriminator score maps, scores
/// clamped to [1e-7, 1-1e-7] before the logs:
///   -mean(log d_src) - mean(log(1 - d_stylized))
Tensor adv_loss_scores(const Tensor& d_src, const Tensor& d_stylized);
Tensor adv_loss(const Discriminator& disc, const Tensor& prob_src,
                const Tensor& prob_stylized);
/// Generator-side fooling objective: -mean(log d_stylized).
Tensor fooling_loss(const Tensor& d_stylized);

struct TrainResult {
  Checkpoint checkpoint;
  std::string metrics_csv;  // full text, header + one row per interval
  std::string trace_csv;    // per-class coefficient contributions
  MetricsRecord source_eval;
  MetricsRecord target_eval;
};

using CheckpointHook = std::function<void(int64_t iteration, const Checkpoint&)>;

/// Per-iteration schedule: synthesize a stylized sample, step the conditioner
/// on its objective, step the segmenter on source cross entropy, step the
/// segmenter again on the fooling objective over the stylized sample, then
/// step the discriminator on the adversarial objective. Gradients are zeroed
/// between player updates and every player's optimizer owns only its own
/// parameters. All randomness is derived from (seed, purpose, iteration), so
/// a resumed run retraces an uninterrupted one.
TrainResult train(const TrainConfig& config, const EncoderDecoder& codec,
                  const Checkpoint* resume = nullptr,
                  const CheckpointHook& periodic = nullptr);

/// Snapshot of every player plus optimizer state; enough to resume exactly.
Checkpoint make_checkpoint(const TrainConfig& config, int64_t iteration,
                           const SegNet& segnet, const Discriminator& disc,
                           const AshModule& module, SgdMomentum* opt_seg,
                           Adam* opt_disc, SgdMomentum* opt_ash);

}  // namespace ash
