// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "chansr/ablation.hpp"
#include "chansr/metrics.hpp"
#include "chansr/train.hpp"

namespace chansr::report {

/// Single-line JSON. Doubles are written with round-trip precision.
std::string metrics_to_json(const eval::MetricsReport& r);
eval::MetricsReport metrics_from_json(std::string_view line);

std::string epoch_to_json(const train::EpochRecord& r);
train::EpochRecord epoch_from_json(std::string_view line);

/// Aligned text: an MAE block and an STDE block, one row per report, columns
/// PL, R_p, DS, phi, theta, LOS/NLOS accuracy.
std::string metrics_table(const std::vector<eval::MetricsReport>& reports);

std::string ablation_table(const eval::AblationTable& table);
/// One line per (variant, seed) run followed by one summary line per row.
std::string ablation_jsonl(const eval::AblationTable& table);

struct ReportFiles {
  std::filesystem::path jsonl;
  std::filesystem::path text;
};

/// Writes `<stem>.jsonl` and `<stem>.txt` under `dir` (created if needed).
/// An empty list yields an empty JSONL file and a header-only table.
ReportFiles emit_report(const std::vector<eval::MetricsReport>& reports,
                        const std::filesystem::path& dir, const std::string& stem);
ReportFiles emit_ablation(const eval::AblationTable& table,
                          const std::filesystem::path& dir, const std::string& stem);

/// Per-epoch curve data, one JSON object per line.
void write_train_log(const std::filesystem::path& path, const train::TrainLog& log);
train::TrainLog read_train_log(const std::filesystem::path& path);

/// Appends `line` plus a newline; used for streaming epoch records.
void append_line(const std::filesystem::path& path, std::string_view line);

}  // namespace chansr::report
