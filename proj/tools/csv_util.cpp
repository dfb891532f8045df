// SPDX-License-Identifier: Apache-2.0
#include "csv_util.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cers/errors.hpp"

namespace cers::cli {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::vector<int> read_label_column(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  std::vector<int> labels;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i == 0 && lines[i] == "label") continue;
    try {
      labels.push_back(std::stoi(lines[i]));
    } catch (const std::exception&) {
      throw DataError("bad label line in " + path.string() + ": " + lines[i]);
    }
  }
  if (labels.empty()) throw DataError("no labels in " + path.string());
  return labels;
}

PredTable read_pred_table(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw DataError("empty prediction file " + path.string());
  const auto header = split_csv_line(lines[0]);
  int id_col = -1, pred_col = -1, score_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "slide_id") id_col = static_cast<int>(c);
    else if (header[c] == "pred") pred_col = static_cast<int>(c);
    else if (header[c] == "score") score_col = static_cast<int>(c);
  }
  if (pred_col < 0 && score_col < 0)
    throw DataError("prediction file needs a 'pred' or 'score' column: " +
                    path.string());
  PredTable table;
  table.has_pred = pred_col >= 0;
  table.has_score = score_col >= 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split_csv_line(lines[i]);
    if (fields.size() != header.size())
      throw DataError("ragged row in " + path.string() + ": " + lines[i]);
    if (id_col >= 0) table.slide_ids.push_back(fields[static_cast<std::size_t>(id_col)]);
    try {
      if (pred_col >= 0)
        table.preds.push_back(std::stoi(fields[static_cast<std::size_t>(pred_col)]));
      if (score_col >= 0)
        table.scores.push_back(std::stod(fields[static_cast<std::size_t>(score_col)]));
    } catch (const std::exception&) {
      throw DataError("bad row in " + path.string() + ": " + lines[i]);
    }
  }
  return table;
}

ScoreLabelTable read_score_label_table(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw DataError("empty score file " + path.string());
  const auto header = split_csv_line(lines[0]);
  int score_col = -1, label_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "score") score_col = static_cast<int>(c);
    else if (header[c] == "label") label_col = static_cast<int>(c);
  }
  if (score_col < 0 || label_col < 0)
    throw DataError("score file needs 'score' and 'label' columns: " + path.string());
  ScoreLabelTable table;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split_csv_line(lines[i]);
    if (fields.size() != header.size())
      throw DataError("ragged row in " + path.string() + ": " + lines[i]);
    try {
      table.scores.push_back(std::stod(fields[static_cast<std::size_t>(score_col)]));
      table.labels.push_back(std::stoi(fields[static_cast<std::size_t>(label_col)]));
    } catch (const std::exception&) {
      throw DataError("bad row in " + path.string() + ": " + lines[i]);
    }
  }
  return table;
}

ConfidenceTable read_confidence_table(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw DataError("empty confidence file " + path.string());
  const auto header = split_csv_line(lines[0]);
  int id_col = -1, conf_col = -1, ood_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "slide_id") id_col = static_cast<int>(c);
    else if (header[c] == "confidence") conf_col = static_cast<int>(c);
    else if (header[c] == "is_ood") ood_col = static_cast<int>(c);
  }
  if (id_col < 0 || conf_col < 0)
    throw DataError("confidence file needs 'slide_id' and 'confidence' columns: " +
                    path.string());
  ConfidenceTable table;
  table.has_ood = ood_col >= 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split_csv_line(lines[i]);
    if (fields.size() != header.size())
      throw DataError("ragged row in " + path.string() + ": " + lines[i]);
    table.slide_ids.push_back(fields[static_cast<std::size_t>(id_col)]);
    try {
      table.confidences.push_back(std::stod(fields[static_cast<std::size_t>(conf_col)]));
      if (ood_col >= 0)
        table.is_ood.push_back(std::stoi(fields[static_cast<std::size_t>(ood_col)]) != 0);
    } catch (const std::exception&) {
      throw DataError("bad row in " + path.string() + ": " + lines[i]);
    }
  }
  return table;
}

}  // namespace cers::cli
