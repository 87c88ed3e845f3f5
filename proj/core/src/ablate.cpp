#include "ash/ablate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <thread>

namespace ash {

double median(std::vector<double> values) {
  values.erase(std::remove_if(values.begin(), values.end(),
                              [](double v) { return std::isnan(v); }),
               values.end());
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

MetricsRecord median_record(const std::vector<TrainResult>& results, bool target) {
  MetricsRecord rec;
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<double> vals;
    for (const auto& r : results) {
      const MetricsRecord& m = target ? r.target_eval : r.source_eval;
      if (m.present[c]) vals.push_back(m.iou[c]);
    }
    rec.present[c] = !vals.empty();
    rec.iou[c] = median(vals);
  }
  std::vector<double> mious;
  for (const auto& r : results) mious.push_back(target ? r.target_eval.miou : r.source_eval.miou);
  rec.miou = median(std::move(mious));
  return rec;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void append_record_row(std::string& csv, const MetricsRecord& rec) {
  for (int c = 0; c < kNumClasses; ++c) {
    csv += fmt(rec.iou[c]);
    csv += ',';
  }
  csv += fmt(rec.miou);
  csv += '\n';
}

}  // namespace

AblateReport run_ablation(const TrainConfig& base, const EncoderDecoder& codec,
                          int seeds, bool include_uniform, int jobs,
                          const CellCallback& cell_done) {
  if (seeds < 1) throw std::invalid_argument("run_ablation: need at least one seed");

  struct RowSpec {
    const char* name;
    bool stylization, noise, ash, uniform;
  };
  std::vector<RowSpec> specs = {
      {"baseline", false, false, false, false},
      {"stylization", true, false, false, false},
      {"noise", true, true, false, false},
      {"ash", true, true, true, false},
  };
  if (include_uniform) specs.push_back({"ash_uniform", true, true, true, true});

  struct Cell {
    size_t row;
    int seed_index;
    TrainConfig config;
  };
  std::vector<Cell> cells;
  for (size_t r = 0; r < specs.size(); ++r) {
    for (int j = 0; j < seeds; ++j) {
      TrainConfig cfg = base;
      cfg.stylization = specs[r].stylization;
      cfg.noise = specs[r].noise;
      cfg.ash = specs[r].ash;
      cfg.uniform_semantics = specs[r].uniform;
      cfg.seed = base.seed + static_cast<uint64_t>(j);
      cfg.validate();
      cells.push_back({r, j, cfg});
    }
  }

  std::vector<std::vector<TrainResult>> results(specs.size(),
                                                std::vector<TrainResult>(seeds));
  int workers = jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min<int>(workers, static_cast<int>(cells.size())));

  std::atomic<size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      try {
        TrainResult res = train(cells[i].config, codec);
        if (cell_done) {
          std::lock_guard<std::mutex> lock(mu);
          cell_done(specs[cells[i].row].name, cells[i].config.seed, res);
        }
        results[cells[i].row][cells[i].seed_index] = std::move(res);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  AblateReport report;
  report.summary_csv = "config";
  for (int c = 0; c < kNumClasses; ++c) {
    report.summary_csv += ',';
    report.summary_csv += kClassNames[c];
  }
  report.summary_csv += ",miou\n";
  report.details_csv = "config,seed,domain";
  for (int c = 0; c < kNumClasses; ++c) {
    report.details_csv += ',';
    report.details_csv += kClassNames[c];
  }
  report.details_csv += ",miou\n";

  for (size_t r = 0; r < specs.size(); ++r) {
    AblateRow row;
    row.name = specs[r].name;
    row.per_seed = std::move(results[r]);
    row.median_target = median_record(row.per_seed, /*target=*/true);
    row.median_source = median_record(row.per_seed, /*target=*/false);

    report.summary_csv += row.name + ",";
    append_record_row(report.summary_csv, row.median_target);
    for (int j = 0; j < seeds; ++j) {
      for (int domain = 0; domain < 2; ++domain) {
        const MetricsRecord& m = domain == 0 ? row.per_seed[j].source_eval
                                             : row.per_seed[j].target_eval;
        report.details_csv += row.name + "," +
                              std::to_string(base.seed + static_cast<uint64_t>(j)) + "," +
                              (domain == 0 ? "source," : "target,");
        append_record_row(report.details_csv, m);
      }
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace ash
