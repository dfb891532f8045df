// SPDX-License-Identifier: Apache-2.0
#include "common.hpp"

#include <cmath>

#include "cers/errors.hpp"

namespace cers::cli {

LoadedDataset load_dataset(const std::filesystem::path& manifest_path,
                           bool require_labels) {
  const auto entries = read_manifest(manifest_path);
  if (entries.empty()) throw DataError("manifest has no rows: " + manifest_path.string());
  const auto base = manifest_path.parent_path();

  LoadedDataset data;
  for (const auto& entry : entries) {
    const EmbeddingBag bag = read_bag_file(base / entry.path);
    if (require_labels && entry.label < 0)
      throw DataError("unlabeled bag in manifest: " + entry.slide_id);
    if (data.dim == 0) data.dim = static_cast<int>(bag.dim);
    else if (data.dim != static_cast<int>(bag.dim))
      throw DataError("bag dimension mismatch at " + entry.slide_id);
    data.samples.push_back({bag.instances(), entry.label});
    data.labels.push_back(entry.label);
    data.slide_ids.push_back(entry.slide_id);
    data.n_signal.push_back(entry.n_signal);
  }
  return data;
}

double binary_score(const Eigen::VectorXd& logits) {
  if (logits.size() != 2) throw DataError("binary score needs two logits");
  return 1.0 / (1.0 + std::exp(logits(0) - logits(1)));
}

void emit_report(const EvalReport& report, const std::filesystem::path& path) {
  write_report_json(report, path);
}

}  // namespace cers::cli
