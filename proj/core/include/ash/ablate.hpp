#pragma once

#include <string>
#include <vector>

#include "ash/train.hpp"

namespace ash {

/// One grid row: a named flag combination evaluated over several seeds.
struct AblateRow {
  std::string name;
  std::vector<TrainResult> per_seed;
  MetricsRecord median_target;  // per-class medians and median mIoU
  MetricsRecord median_source;
};

struct AblateReport {
  std::vector<AblateRow> rows;
  std::string summary_csv;  // config,<class ious...>,miou - median target-domain table
  std::string details_csv;  // one line per (config, seed, domain)
};

using CellCallback =
    std::function<void(const std::string& row, uint64_t seed, const TrainResult&)>;

/// Runs the flag ladder (baseline, +stylization, +noise, +ash and optionally
/// the uniform-semantics variant) over `seeds` seeds. Cells are independent
/// deterministic jobs; `jobs` worker threads execute them (0 = hardware
/// concurrency). Results are identical regardless of scheduling.
AblateReport run_ablation(const TrainConfig& base, const EncoderDecoder& codec,
                          int seeds, bool include_uniform, int jobs = 0,
                          const CellCallback& cell_done = nullptr);

double median(std::vector<double> values);

}  // namespace ash
