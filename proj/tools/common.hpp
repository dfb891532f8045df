// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cers/bag.hpp"
#include "cers/gated_mil.hpp"
#include "cers/report.hpp"

namespace cers::cli {

struct LoadedDataset {
  std::vector<BagSample> samples;
  std::vector<int> labels;
  std::vector<std::string> slide_ids;
  std::vector<int> n_signal;
  int dim = 0;
};

/// Loads every bag referenced by a manifest; paths resolve relative to the
/// manifest's directory. require_labels rejects unlabeled rows.
LoadedDataset load_dataset(const std::filesystem::path& manifest_path,
                           bool require_labels);

/// Probability of class 1 under softmax; only defined for binary logits.
double binary_score(const Eigen::VectorXd& logits);

void emit_report(const EvalReport& report, const std::filesystem::path& path);

}  // namespace cers::cli
