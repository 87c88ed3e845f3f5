#include "ash/train.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "ash/analysis.hpp"
#include "ash/ops.hpp"
#include "ash/rng.hpp"
#include "ash/stylization.hpp"

namespace ash {

void TrainConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("config: iterations must be >= 0");
  if (lr_seg <= 0 || lr_disc <= 0 || lr_ash <= 0) {
    throw std::invalid_argument("config: learning rates must be > 0");
  }
  if (!(eps_smooth >= 0.0 && eps_smooth < 1.0)) {
    throw std::invalid_argument("config: eps_smooth must lie in [0, 1)");
  }
  if (image_size < 32 || image_size % 16 != 0) {
    throw std::invalid_argument("config: image_size must be >= 32 and divisible by 16");
  }
  if (noise && !stylization) {
    throw std::invalid_argument("config: noise requires stylization (flags form a chain)");
  }
  if (ash && !noise) {
    throw std::invalid_argument("config: ash requires noise (flags form a chain)");
  }
  if (uniform_semantics && !ash) {
    throw std::invalid_argument("config: uniform_semantics requires ash");
  }
  if (log_every < 1 || trace_every < 1) {
    throw std::invalid_argument("config: logging intervals must be >= 1");
  }
  if (checkpoint_every < 0) throw std::invalid_argument("config: checkpoint_every must be >= 0");
  if (eval_scenes < 1) throw std::invalid_argument("config: eval_scenes must be >= 1");
  if (!(target_severity >= 0.0 && target_severity <= 1.0)) {
    throw std::invalid_argument("config: target_severity must lie in [0, 1]");
  }
}

std::string TrainConfig::canonical() const {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "iterations=%d;lr_seg=%.17g;lr_disc=%.17g;lr_ash=%.17g;momentum=%.17g;"
                "eps_smooth=%.17g;seed=%llu;image_size=%d;stylization=%d;noise=%d;ash=%d;"
                "uniform_semantics=%d;target_severity=%.17g;log_every=%d;trace_every=%d;"
                "checkpoint_every=%d;eval_scenes=%d",
                iterations, lr_seg, lr_disc, lr_ash, momentum, eps_smooth,
                static_cast<unsigned long long>(seed), image_size, stylization ? 1 : 0,
                noise ? 1 : 0, ash ? 1 : 0, uniform_semantics ? 1 : 0, target_severity,
                log_every, trace_every, checkpoint_every, eval_scenes);
  return buf;
}

uint64_t TrainConfig::digest() const { return fnv1a64(canonical()); }

Tensor seg_loss(const Tensor& prob, std::span<const int> labels, int ignore_value) {
  return nll_pixelwise(prob, labels, ignore_value);
}

namespace {
constexpr double kScoreLo = 1e-7;
constexpr double kScoreHi = 1.0 - 1e-7;
}  // namespace

Tensor adv_loss_scores(const Tensor& d_src, const Tensor& d_stylized) {
  Tensor src_term = mean(log(clamp(d_src, kScoreLo, kScoreHi)));
  Tensor sty_term = mean(log(clamp(-d_stylized + 1.0, kScoreLo, kScoreHi)));
  return -src_term - sty_term;
}

Tensor adv_loss(const Discriminator& disc, const Tensor& prob_src,
                const Tensor& prob_stylized) {
  return adv_loss_scores(disc(prob_src), disc(prob_stylized));
}

Tensor fooling_loss(const Tensor& d_stylized) {
  return -mean(log(clamp(d_stylized, kScoreLo, kScoreHi)));
}

Checkpoint make_checkpoint(const TrainConfig& config, int64_t iteration,
                           const SegNet& segnet, const Discriminator& disc,
                           const AshModule& module, SgdMomentum* opt_seg,
                           Adam* opt_disc, SgdMomentum* opt_ash) {
  Checkpoint ckpt;
  ckpt.set_meta("format", "1");
  ckpt.set_meta("iteration", std::to_string(iteration));
  ckpt.set_meta("config_digest", std::to_string(config.digest()));
  ckpt.set_meta("seed", std::to_string(config.seed));
  ckpt.set_meta("num_classes", std::to_string(segnet.num_classes()));
  ckpt.set_meta("image_size", std::to_string(config.image_size));
  checkpoint_add_params(ckpt, segnet.named_params());
  checkpoint_add_params(ckpt, disc.named_params());
  checkpoint_add_params(ckpt, module.named_params());

  auto add_state = [&ckpt](const std::string& name, const std::vector<double>& v,
                           const Shape& shape) {
    ckpt.add(name, Tensor::from_data(shape, v));
  };
  if (opt_seg) {
    const auto& ps = opt_seg->params();
    for (size_t i = 0; i < ps.size(); ++i) {
      add_state("optim.seg.v." + ps[i].name, opt_seg->velocity(i),
                ps[i].tensor.shape());
    }
  }
  if (opt_ash) {
    const auto& ps = opt_ash->params();
    for (size_t i = 0; i < ps.size(); ++i) {
      add_state("optim.ash.v." + ps[i].name, opt_ash->velocity(i),
                ps[i].tensor.shape());
    }
  }
  if (opt_disc) {
    const auto& ps = opt_disc->params();
    for (size_t i = 0; i < ps.size(); ++i) {
      add_state("optim.disc.m." + ps[i].name, opt_disc->moment1(i),
                ps[i].tensor.shape());
      add_state("optim.disc.v." + ps[i].name, opt_disc->moment2(i),
                ps[i].tensor.shape());
    }
    ckpt.set_meta("optim.disc.t", std::to_string(opt_disc->step_count()));
  }
  return ckpt;
}

namespace {

void load_optimizer_state(const Checkpoint& ckpt, const std::string& prefix,
                          const std::vector<NamedParam>& params,
                          const std::function<std::vector<double>&(size_t)>& slot) {
  for (size_t i = 0; i < params.size(); ++i) {
    const Tensor* t = ckpt.find(prefix + params[i].name);
    if (t) slot(i) = t->values();
  }
}

std::string fmt_loss(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void check_finite(double v, const char* player, int64_t iteration) {
  if (!std::isfinite(v)) {
    throw std::runtime_error("iteration " + std::to_string(iteration) +
                             ": non-finite " + player + " loss, aborting");
  }
}

}  // namespace

TrainResult train(const TrainConfig& config, const EncoderDecoder& codec,
                  const Checkpoint* resume, const CheckpointHook& periodic) {
  config.validate();
  if (!codec.frozen()) {
    throw std::invalid_argument("train: encoder/decoder must be pretrained and frozen");
  }

  const DomainSpec src_spec = source_domain(config.image_size);
  const DomainSpec tgt_spec = target_domain(config.image_size, config.target_severity);

  SegNet segnet(kNumClasses, config.seed);
  Discriminator disc(kNumClasses, config.seed);
  AshModule module(kNumClasses, EncoderDecoder::kFeatureChannels, config.seed);

  SgdMomentum opt_seg(segnet.named_params(), config.lr_seg, config.momentum);
  SgdMomentum opt_ash(module.named_params(), config.lr_ash, config.momentum);
  Adam opt_disc(disc.named_params(), config.lr_disc, config.momentum);

  int64_t start_iter = 0;
  if (resume) {
    auto seg_params = segnet.named_params();
    auto disc_params = disc.named_params();
    auto ash_list = module.named_params();
    checkpoint_load_params(*resume, seg_params);
    checkpoint_load_params(*resume, disc_params);
    checkpoint_load_params(*resume, ash_list);
    load_optimizer_state(*resume, "optim.seg.v.", opt_seg.params(),
                         [&](size_t i) -> std::vector<double>& { return opt_seg.velocity(i); });
    load_optimizer_state(*resume, "optim.ash.v.", opt_ash.params(),
                         [&](size_t i) -> std::vector<double>& { return opt_ash.velocity(i); });
    load_optimizer_state(*resume, "optim.disc.m.", opt_disc.params(),
                         [&](size_t i) -> std::vector<double>& { return opt_disc.moment1(i); });
    load_optimizer_state(*resume, "optim.disc.v.", opt_disc.params(),
                         [&](size_t i) -> std::vector<double>& { return opt_disc.moment2(i); });
    if (auto t = resume->get_meta("optim.disc.t")) opt_disc.set_step_count(std::stoll(*t));
    if (auto it = resume->get_meta("iteration")) start_iter = std::stoll(*it);
  }

  const SceneSample trace_sample = gen_scene(src_spec, derive_seed(config.seed, "trace-sample"));
  const Shape style_shape = {EncoderDecoder::kFeatureChannels,
                             config.image_size / EncoderDecoder::kSpatialFactor,
                             config.image_size / EncoderDecoder::kSpatialFactor};

  std::string metrics_csv = std::string(kMetricsHeader) + "\n";
  std::string trace_csv = std::string(kTraceHeader) + "\n";

  HallucinateOptions hopts;
  hopts.apply_noise = config.noise;
  hopts.uniform_semantics = config.uniform_semantics;
  hopts.eps_smooth = config.eps_smooth;

  for (int64_t iter = start_iter; iter < config.iterations; ++iter) {
    SceneSample scene = gen_scene(src_spec, derive_seed(config.seed, "scene", iter));
    const Tensor& x_src = scene.image;

    double v_seg = 0.0, v_adv = 0.0, v_ash = 0.0, v_disc = 0.0;
    Tensor x_stylized;  // detached stylized image for the later players

    if (config.stylization) {
      Tensor style = gen_style(derive_seed(config.seed, "style", iter), config.image_size);
      const uint64_t noise_seed = derive_seed(config.seed, "noise", iter);
      if (config.ash) {
        // Conditioner update: everything else is frozen for this player.
        FreezeGuard freeze_seg(segnet.named_params());
        FreezeGuard freeze_disc(disc.named_params());
        HallucinateResult h = hallucinate(x_src, style, segnet, module, codec, noise_seed, hopts);
        Tensor prob_stylized = segnet(h.x_stylized);
        Tensor d_stylized = disc(prob_stylized);
        Tensor d_src;
        {
          NoGradGuard ng;
          d_src = disc(h.prob_src);
        }
        Tensor adv = adv_loss_scores(d_src, d_stylized);
        Tensor loss = ash_loss(adv, h.f_src, h.f_style_perturbed, h.merged);
        v_ash = loss.value();
        check_finite(v_ash, "ash", iter);
        loss.backward();
        opt_ash.step();
        opt_ash.zero_grad();
        x_stylized = h.x_stylized.detach();
      } else {
        NoGradGuard ng;
        Tensor f_src = codec.encode(x_src);
        Tensor f_sty = codec.encode(style);
        if (config.noise) f_sty = orthogonal_noise(f_sty, noise_seed);
        x_stylized = codec.decode(adain(f_src, f_sty));
      }
    }

    // Segmenter on source labels.
    Tensor prob_src = segnet(x_src);
    Tensor loss_seg = seg_loss(prob_src, scene.labels);
    v_seg = loss_seg.value();
    check_finite(v_seg, "segmentation", iter);
    loss_seg.backward();
    opt_seg.step();
    opt_seg.zero_grad();

    Tensor prob_sty_detached;
    if (config.stylization) {
      // Segmenter on stylized data: make its output look source-like to D.
      Tensor prob_stylized = segnet(x_stylized);
      Tensor d;
      {
        FreezeGuard freeze_disc(disc.named_params());
        d = disc(prob_stylized);
      }
      Tensor loss_fool = fooling_loss(d);
      v_adv = loss_fool.value();
      check_finite(v_adv, "adversarial", iter);
      loss_fool.backward();
      opt_seg.step();
      opt_seg.zero_grad();
      prob_sty_detached = prob_stylized.detach();

      // Discriminator on the detached maps produced this iteration.
      Tensor loss_disc = adv_loss(disc, prob_src.detach(), prob_sty_detached);
      v_disc = loss_disc.value();
      check_finite(v_disc, "discriminator", iter);
      loss_disc.backward();
      opt_disc.step();
      opt_disc.zero_grad();
    }

    const int64_t step = iter + 1;
    if (step % config.log_every == 0 || step == config.iterations) {
      metrics_csv += std::to_string(step);
      metrics_csv += ',';
      metrics_csv += fmt_loss(v_seg);
      metrics_csv += ',';
      metrics_csv += fmt_loss(v_adv);
      metrics_csv += ',';
      metrics_csv += fmt_loss(v_ash);
      metrics_csv += ',';
      metrics_csv += fmt_loss(v_disc);
      metrics_csv += '\n';
    }
    if (config.ash && step % config.trace_every == 0) {
      NoGradGuard ng;
      Tensor prob = config.uniform_semantics
                        ? uniform_probability_map(kNumClasses, config.image_size, config.image_size)
                        : segnet(trace_sample.image);
      append_trace_rows(trace_csv, step, prob, module, style_shape, config.eps_smooth);
    }
    if (periodic && config.checkpoint_every > 0 && step % config.checkpoint_every == 0) {
      periodic(step, make_checkpoint(config, step, segnet, disc, module, &opt_seg,
                                     &opt_disc, &opt_ash));
    }
  }

  TrainResult result;
  result.checkpoint = make_checkpoint(config, config.iterations, segnet, disc, module,
                                      &opt_seg, &opt_disc, &opt_ash);
  result.metrics_csv = std::move(metrics_csv);
  result.trace_csv = std::move(trace_csv);

  SegmentFn fn = [&](const SceneSample& s) {
    NoGradGuard ng;
    return segnet(s.image);
  };
  result.source_eval = evaluate(fn, src_spec, config.eval_scenes,
                                derive_seed(config.seed, "eval:source"));
  result.target_eval = evaluate(fn, tgt_spec, config.eval_scenes,
                                derive_seed(config.seed, "eval:target"));
  return result;
}

}  // namespace ash
