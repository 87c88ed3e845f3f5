#include "ash/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "ash/ablate.hpp"
#include "ash/analysis.hpp"
#include "ash/rng.hpp"

namespace ash {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path.string());
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

std::string default_data_dir() {
  if (const char* env = std::getenv("ASH_LAB_DATA_DIR")) return env;
  return "data";
}

std::string fmt_iou(double v) {
  if (std::isnan(v)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

DomainSpec domain_by_name(const std::string& name, int image_size, double severity) {
  if (name == "source") return source_domain(image_size);
  if (name == "target") return target_domain(image_size, severity);
  throw std::invalid_argument("unknown domain: " + name + " (expected source or target)");
}

void add_config_option(CLI::App* cmd, std::string& config_path) {
  cmd->add_option("--config", config_path, "JSON key-value config document");
}

// The config file forms the option defaults; explicit flags override it.
TrainConfig preload_config(int argc, const char* const* argv, std::string& config_path) {
  TrainConfig cfg;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      config_path = argv[i + 1];
      return config_from_json_file(config_path, cfg);
    }
  }
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg.rfind("--config=", 0) == 0) {
      config_path = arg.substr(9);
      return config_from_json_file(config_path, cfg);
    }
  }
  return cfg;
}

struct EvalCsv {
  std::string text = "domain";

  EvalCsv() {
    for (int c = 0; c < kNumClasses; ++c) {
      text += ',';
      text += kClassNames[c];
    }
    text += ",miou\n";
  }
  void add(const std::string& domain, const MetricsRecord& rec) {
    text += domain;
    for (int c = 0; c < kNumClasses; ++c) {
      text += ',';
      text += std::isnan(rec.iou[c]) ? "nan" : fmt_iou(rec.iou[c]);
    }
    text += ',';
    text += fmt_iou(rec.miou);
    text += '\n';
  }
};

void write_train_artifacts(const fs::path& dir, const TrainConfig& cfg,
                           const TrainResult& result) {
  fs::create_directories(dir);
  write_text(dir / "metrics.csv", result.metrics_csv);
  // Charts are regenerated from the CSV text, never from live state.
  write_text(dir / "loss_curves.svg", svg_from_metrics_csv(result.metrics_csv));
  if (cfg.ash) {
    write_text(dir / "coeff_trace.csv", result.trace_csv);
    write_text(dir / "coeff_trace_raw.svg", svg_from_trace_csv(result.trace_csv, false));
    write_text(dir / "coeff_trace_norm.svg", svg_from_trace_csv(result.trace_csv, true));
  }
  result.checkpoint.save(dir / "checkpoint.ckpt");
  EvalCsv eval;
  eval.add("source", result.source_eval);
  eval.add("target", result.target_eval);
  write_text(dir / "final_eval.csv", eval.text);
}

int run_gen_data(const std::string& out_dir, const std::string& domain, int count,
                 uint64_t seed, int image_size, double severity) {
  fs::create_directories(out_dir);
  json manifest = json::array();
  for (int i = 0; i < count; ++i) {
    const uint64_t s = derive_seed(seed, "gen-data", static_cast<uint64_t>(i));
    char name[64];
    if (domain == "style") {
      std::snprintf(name, sizeof(name), "style_%05d.ppm", i);
      write_ppm(fs::path(out_dir) / name, gen_style(s, image_size));
      manifest.push_back({{"image", name}, {"seed", s}, {"domain", domain}});
    } else {
      SceneSample sample = gen_scene(domain_by_name(domain, image_size, severity), s);
      std::snprintf(name, sizeof(name), "scene_%05d.ppm", i);
      char lbl[64];
      std::snprintf(lbl, sizeof(lbl), "labels_%05d.pgm", i);
      write_ppm(fs::path(out_dir) / name, sample.image);
      write_pgm(fs::path(out_dir) / lbl, sample.labels, sample.size, sample.size);
      manifest.push_back({{"image", name}, {"labels", lbl}, {"seed", s}, {"domain", domain}});
    }
  }
  write_text(fs::path(out_dir) / "index.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << count << " " << domain << " samples to " << out_dir << "\n";
  return 0;
}

std::vector<Tensor> pretrain_dataset(int images, uint64_t seed, int image_size) {
  std::vector<Tensor> data;
  data.reserve(images);
  const DomainSpec spec = source_domain(image_size);
  for (int i = 0; i < images; ++i) {
    const uint64_t s = derive_seed(seed, "pretrain-data", static_cast<uint64_t>(i));
    if (i % 2 == 0) {
      data.push_back(gen_scene(spec, s).image);
    } else {
      data.push_back(gen_style(s, image_size));
    }
  }
  return data;
}

int run_pretrain(const std::string& out, int iterations, int images, uint64_t seed,
                 int image_size) {
  PretrainConfig cfg;
  cfg.iterations = iterations;
  cfg.seed = seed;
  std::vector<Tensor> data = pretrain_dataset(images, seed, image_size);
  EncoderDecoder codec = pretrain_autoencoder(data, cfg);

  std::vector<Tensor> holdout;
  for (int i = 0; i < 24; ++i) {
    const uint64_t s = derive_seed(seed, "pretrain-holdout", static_cast<uint64_t>(i));
    holdout.push_back(i % 2 == 0 ? gen_scene(source_domain(image_size), s).image
                                 : gen_style(s, image_size));
  }
  const double mae = reconstruction_mae(codec, holdout);

  Checkpoint ckpt;
  ckpt.set_meta("format", "1");
  ckpt.set_meta("kind", "encdec");
  ckpt.set_meta("seed", std::to_string(seed));
  ckpt.set_meta("image_size", std::to_string(image_size));
  checkpoint_add_params(ckpt, codec.named_params());
  ckpt.save(out);
  std::printf("pretrained codec saved to %s (held-out reconstruction MAE %.4f)\n",
              out.c_str(), mae);
  return 0;
}

SegNet segnet_from_checkpoint(const Checkpoint& ckpt) {
  const int classes = ckpt.get_meta("num_classes") ? std::stoi(*ckpt.get_meta("num_classes"))
                                                   : kNumClasses;
  const uint64_t seed = ckpt.get_meta("seed") ? std::stoull(*ckpt.get_meta("seed")) : 0;
  SegNet segnet(classes, seed);
  auto params = segnet.named_params();
  checkpoint_load_params(ckpt, params);
  return segnet;
}

int run_eval(const std::string& ckpt_path, const std::string& domain, int scenes,
             uint64_t seed, int image_size, double severity, bool oracle) {
  SegmentFn fn;
  if (oracle) {
    fn = [](const SceneSample& s) {
      Tensor prob = Tensor::zeros({kNumClasses, s.size, s.size});
      auto& p = prob.raw();
      const int hw = s.size * s.size;
      for (int i = 0; i < hw; ++i) p[static_cast<size_t>(s.labels[i]) * hw + i] = 1.0;
      return prob;
    };
  } else {
    Checkpoint ckpt = Checkpoint::load(ckpt_path);
    if (auto sz = ckpt.get_meta("image_size")) image_size = std::stoi(*sz);
    auto segnet = std::make_shared<SegNet>(segnet_from_checkpoint(ckpt));
    fn = [segnet](const SceneSample& s) {
      NoGradGuard ng;
      return (*segnet)(s.image);
    };
  }
  MetricsRecord rec = evaluate(fn, domain_by_name(domain, image_size, severity), scenes, seed);
  std::cout << "domain: " << domain << "  scenes: " << scenes << "\n"
            << format_metrics_table(rec);
  return 0;
}

int run_trace(const std::vector<std::string>& ckpt_args, const std::string& out,
              uint64_t sample_seed, int every_k, double eps_smooth) {
  std::vector<fs::path> paths;
  for (const auto& arg : ckpt_args) {
    fs::path p(arg);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(p)) {
        if (entry.path().extension() == ".ckpt") found.push_back(entry.path());
      }
      std::sort(found.begin(), found.end());
      paths.insert(paths.end(), found.begin(), found.end());
    } else {
      paths.push_back(p);
    }
  }
  if (paths.empty()) throw std::runtime_error("trace: no checkpoints given");

  // Keep checkpoints on the requested interval.
  std::vector<fs::path> kept;
  for (const auto& p : paths) {
    Checkpoint ckpt = Checkpoint::load(p);
    const auto it = ckpt.get_meta("iteration");
    if (!it) throw std::runtime_error("trace: checkpoint lacks iteration meta: " + p.string());
    if (every_k <= 1 || std::stoll(*it) % every_k == 0) kept.push_back(p);
  }
  if (kept.empty()) throw std::runtime_error("trace: no checkpoints on the requested interval");

  Checkpoint first = Checkpoint::load(kept.front());
  const int image_size = first.get_meta("image_size") ? std::stoi(*first.get_meta("image_size")) : 48;
  SceneSample sample = gen_scene(source_domain(image_size), sample_seed);

  const std::string csv = trace_coeffs(kept, sample, eps_smooth);
  write_text(out, csv);
  const fs::path base = fs::path(out).parent_path();
  const std::string stem = fs::path(out).stem().string();
  write_text(base / (stem + "_raw.svg"), svg_from_trace_csv(csv, false));
  write_text(base / (stem + "_norm.svg"), svg_from_trace_csv(csv, true));
  std::cout << "trace written to " << out << "\n";
  return 0;
}

}  // namespace

TrainConfig config_from_json_file(const fs::path& path, TrainConfig base) {
  json doc = json::parse(read_text(path));
  if (!doc.is_object()) throw std::runtime_error("config: expected a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key == "iterations") base.iterations = value.get<int>();
    else if (key == "lr_seg") base.lr_seg = value.get<double>();
    else if (key == "lr_disc") base.lr_disc = value.get<double>();
    else if (key == "lr_ash") base.lr_ash = value.get<double>();
    else if (key == "momentum") base.momentum = value.get<double>();
    else if (key == "eps_smooth") base.eps_smooth = value.get<double>();
    else if (key == "seed") base.seed = value.get<uint64_t>();
    else if (key == "image_size") base.image_size = value.get<int>();
    else if (key == "stylization") base.stylization = value.get<bool>();
    else if (key == "noise") base.noise = value.get<bool>();
    else if (key == "ash") base.ash = value.get<bool>();
    else if (key == "uniform_semantics") base.uniform_semantics = value.get<bool>();
    else if (key == "target_severity") base.target_severity = value.get<double>();
    else if (key == "log_every") base.log_every = value.get<int>();
    else if (key == "trace_every") base.trace_every = value.get<int>();
    else if (key == "checkpoint_every") base.checkpoint_every = value.get<int>();
    else if (key == "eval_scenes") base.eval_scenes = value.get<int>();
    else throw std::runtime_error("config: unknown key '" + key + "'");
  }
  return base;
}

EncoderDecoder load_codec(const fs::path& path) {
  if (!fs::exists(path)) {
    throw std::runtime_error("codec checkpoint not found: " + path.string() +
                             " (run the pretrain subcommand first)");
  }
  Checkpoint ckpt = Checkpoint::load(path);
  const uint64_t seed = ckpt.get_meta("seed") ? std::stoull(*ckpt.get_meta("seed")) : 0;
  EncoderDecoder codec(seed);
  auto params = codec.named_params();
  checkpoint_load_params(ckpt, params);
  codec.freeze();
  return codec;
}

std::string format_metrics_table(const MetricsRecord& rec) {
  std::string out;
  for (int c = 0; c < kNumClasses; ++c) {
    char line[64];
    std::snprintf(line, sizeof(line), "%-12s %s\n", kClassNames[c], fmt_iou(rec.iou[c]).c_str());
    out += line;
  }
  char line[64];
  std::snprintf(line, sizeof(line), "%-12s %s\n", "miou", fmt_iou(rec.miou).c_str());
  out += line;
  return out;
}

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"class-conditioned style hallucination lab for domain-generalized segmentation"};
  app.require_subcommand(1);
  std::string config_path;

  TrainConfig base;
  try {
    base = preload_config(argc, argv, config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "materialize a synthetic dataset");
  std::string gen_out = default_data_dir();
  std::string gen_domain = "source";
  int gen_count = 100;
  uint64_t gen_seed = base.seed;
  int gen_size = base.image_size;
  double gen_severity = base.target_severity;
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--domain", gen_domain, "source | target | style")
      ->check(CLI::IsMember({"source", "target", "style"}));
  gen->add_option("--count", gen_count, "number of samples");
  gen->add_option("--seed", gen_seed, "master seed");
  gen->add_option("--image-size", gen_size, "square image extent");
  gen->add_option("--severity", gen_severity, "target-domain gap severity");
  add_config_option(gen, config_path);

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "train and freeze the stylization codec");
  std::string pre_out = "encdec.ckpt";
  int pre_iters = 3000;
  int pre_images = 520;
  uint64_t pre_seed = base.seed;
  int pre_size = base.image_size;
  pre->add_option("--out", pre_out, "output checkpoint");
  pre->add_option("--iterations", pre_iters, "optimizer steps");
  pre->add_option("--images", pre_images, "dataset size (scenes + styles)");
  pre->add_option("--seed", pre_seed, "master seed");
  pre->add_option("--image-size", pre_size, "square image extent");
  add_config_option(pre, config_path);

  // train
  auto* tr = app.add_subcommand("train", "run the adversarial training loop");
  std::string tr_encdec = "encdec.ckpt";
  std::string tr_out = "run";
  std::string tr_resume;
  tr->add_option("--encdec", tr_encdec, "pretrained codec checkpoint");
  tr->add_option("--out", tr_out, "output directory");
  tr->add_option("--resume", tr_resume, "resume from a training checkpoint");
  tr->add_option("--iterations", base.iterations, "training iterations");
  tr->add_option("--seed", base.seed, "master seed");
  tr->add_option("--image-size", base.image_size, "square image extent");
  tr->add_flag("--stylization,!--no-stylization", base.stylization, "train on stylized data");
  tr->add_flag("--noise,!--no-noise", base.noise, "orthogonal style noise");
  tr->add_flag("--ash,!--no-ash", base.ash, "semantic conditioning of style features");
  tr->add_flag("--uniform-semantics", base.uniform_semantics,
               "condition on a uniform probability map instead of predictions");
  tr->add_option("--lr-seg", base.lr_seg, "segmenter learning rate");
  tr->add_option("--lr-disc", base.lr_disc, "discriminator learning rate");
  tr->add_option("--lr-ash", base.lr_ash, "conditioner learning rate");
  tr->add_option("--eps-smooth", base.eps_smooth, "label smoothing coefficient");
  tr->add_option("--target-severity", base.target_severity, "domain gap severity");
  tr->add_option("--log-every", base.log_every, "metrics CSV interval");
  tr->add_option("--trace-every", base.trace_every, "coefficient trace interval");
  tr->add_option("--checkpoint-every", base.checkpoint_every, "periodic checkpoint interval");
  tr->add_option("--eval-scenes", base.eval_scenes, "held-out scenes per domain");
  add_config_option(tr, config_path);

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a domain");
  std::string ev_ckpt = "run/checkpoint.ckpt";
  std::string ev_domain = "target";
  int ev_scenes = 24;
  uint64_t ev_seed = base.seed;
  bool ev_oracle = false;
  ev->add_option("--checkpoint", ev_ckpt, "training checkpoint");
  ev->add_option("--domain", ev_domain, "source | target")
      ->check(CLI::IsMember({"source", "target"}));
  ev->add_option("--scenes", ev_scenes, "held-out scenes");
  ev->add_option("--seed", ev_seed, "evaluation seed");
  ev->add_flag("--oracle", ev_oracle, "use ground-truth labels as the prediction");
  add_config_option(ev, config_path);

  // trace
  auto* trc = app.add_subcommand("trace", "per-class coefficient contributions over checkpoints");
  std::vector<std::string> trc_ckpts;
  std::string trc_out = "coeff_trace.csv";
  uint64_t trc_sample_seed = 7;
  int trc_every = 1;
  trc->add_option("--checkpoint", trc_ckpts, "checkpoint files or directories")->required();
  trc->add_option("--out", trc_out, "output CSV path");
  trc->add_option("--sample-seed", trc_sample_seed, "seed of the probed source scene");
  trc->add_option("--every-k", trc_every, "keep checkpoints on this iteration interval");
  add_config_option(trc, config_path);

  // ablate
  auto* ab = app.add_subcommand("ablate", "run the flag-ladder study over several seeds");
  std::string ab_encdec = "encdec.ckpt";
  std::string ab_out = "ablation";
  int ab_seeds = 3;
  bool ab_uniform = false;
  int ab_jobs = 0;
  ab->add_option("--encdec", ab_encdec, "pretrained codec checkpoint");
  ab->add_option("--out", ab_out, "output directory");
  ab->add_option("--seeds", ab_seeds, "seeds per configuration");
  ab->add_option("--iterations", base.iterations, "iterations per run");
  ab->add_option("--seed", base.seed, "base seed");
  ab->add_option("--image-size", base.image_size, "square image extent");
  ab->add_option("--target-severity", base.target_severity, "domain gap severity");
  ab->add_flag("--with-uniform", ab_uniform, "include the uniform-semantics row");
  ab->add_option("--jobs", ab_jobs, "worker threads (0 = hardware)");
  add_config_option(ab, config_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (gen->parsed()) {
      return run_gen_data(gen_out, gen_domain, gen_count, gen_seed, gen_size, gen_severity);
    }
    if (pre->parsed()) {
      return run_pretrain(pre_out, pre_iters, pre_images, pre_seed, pre_size);
    }
    if (tr->parsed()) {
      EncoderDecoder codec = load_codec(tr_encdec);
      Checkpoint resume;
      const Checkpoint* resume_ptr = nullptr;
      if (!tr_resume.empty()) {
        resume = Checkpoint::load(tr_resume);
        resume_ptr = &resume;
      }
      fs::create_directories(tr_out);
      CheckpointHook hook = [&](int64_t step, const Checkpoint& ckpt) {
        char name[64];
        std::snprintf(name, sizeof(name), "ckpt_%07lld.ckpt", static_cast<long long>(step));
        ckpt.save(fs::path(tr_out) / name);
      };
      TrainResult result = train(base, codec, resume_ptr, hook);
      write_train_artifacts(tr_out, base, result);
      std::cout << "source domain:\n" << format_metrics_table(result.source_eval)
                << "target domain:\n" << format_metrics_table(result.target_eval)
                << "artifacts in " << tr_out << "\n";
      return 0;
    }
    if (ev->parsed()) {
      return run_eval(ev_ckpt, ev_domain, ev_scenes, ev_seed, base.image_size,
                      base.target_severity, ev_oracle);
    }
    if (trc->parsed()) {
      return run_trace(trc_ckpts, trc_out, trc_sample_seed, trc_every, base.eps_smooth);
    }
    if (ab->parsed()) {
      EncoderDecoder codec = load_codec(ab_encdec);
      fs::create_directories(ab_out);
      CellCallback cell = [&](const std::string& row, uint64_t seed, const TrainResult& res) {
        TrainConfig cell_cfg = base;
        cell_cfg.ash = row == "ash" || row == "ash_uniform";
        write_train_artifacts(fs::path(ab_out) / (row + "_seed" + std::to_string(seed)),
                              cell_cfg, res);
      };
      AblateReport report = run_ablation(base, codec, ab_seeds, ab_uniform, ab_jobs, cell);
      write_text(fs::path(ab_out) / "summary.csv", report.summary_csv);
      write_text(fs::path(ab_out) / "details.csv", report.details_csv);
      std::cout << report.summary_csv << "artifacts in " << ab_out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace ash
