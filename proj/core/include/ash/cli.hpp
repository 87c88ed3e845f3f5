#pragma once

#include <filesystem>
#include <string>

#include "ash/nets.hpp"
#include "ash/synth.hpp"
#include "ash/train.hpp"

namespace ash {

/// Entry point shared by the ash_lab binary and the test suites.
/// Exit codes: 0 success, 1 runtime failure, 2 usage error.
int cli_main(int argc, const char* const* argv);

/// Overlay of a key-value JSON document onto a config.
TrainConfig config_from_json_file(const std::filesystem::path& path, TrainConfig base);

/// Load a pretrained codec checkpoint written by the pretrain subcommand.
EncoderDecoder load_codec(const std::filesystem::path& path);

/// Per-class IoU plus mIoU rendered as an aligned text table.
std::string format_metrics_table(const MetricsRecord& rec);

}  // namespace ash
