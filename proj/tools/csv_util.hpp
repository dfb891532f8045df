// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cers::cli {

std::string format_double(double v);

std::vector<std::string> split_csv_line(const std::string& line);

/// Single-column label file; a leading `label` header line is optional.
std::vector<int> read_label_column(const std::filesystem::path& path);

/// Headered prediction table with any of: slide_id, pred, score.
struct PredTable {
  std::vector<std::string> slide_ids;
  std::vector<int> preds;
  std::vector<double> scores;
  bool has_pred = false;
  bool has_score = false;
};
PredTable read_pred_table(const std::filesystem::path& path);

/// Headered `score,label` calibration table.
struct ScoreLabelTable {
  std::vector<double> scores;
  std::vector<int> labels;
};
ScoreLabelTable read_score_label_table(const std::filesystem::path& path);

/// Headered `slide_id,confidence[,is_ood]` confidence table.
struct ConfidenceTable {
  std::vector<std::string> slide_ids;
  std::vector<double> confidences;
  std::vector<bool> is_ood;
  bool has_ood = false;
};
ConfidenceTable read_confidence_table(const std::filesystem::path& path);

std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace cers::cli
