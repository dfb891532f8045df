// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace cers {

struct ConfusionMatrix {
  int classes = 0;
  std::vector<std::int64_t> counts;  // row = true class, col = predicted

  std::int64_t at(int truth, int pred) const {
    return counts[static_cast<std::size_t>(truth) * static_cast<std::size_t>(classes) +
                  static_cast<std::size_t>(pred)];
  }
  std::int64_t total() const;
};

/// classes = 0 infers the count from the data.
ConfusionMatrix confusion_matrix(const std::vector<int>& y_true,
                                 const std::vector<int>& y_pred, int classes = 0);

struct ClassificationMetrics {
  double balanced_accuracy = 0.0;  // mean recall over classes present in y_true
  double accuracy = 0.0;
  std::vector<double> per_class_recall;  // NaN for absent classes
  std::vector<int> absent_classes;       // excluded from B-ACC, caller may warn
  double f1 = 0.0;         // binary (positive = 1) when C == 2, macro otherwise
  double precision = 0.0;  // same convention as f1
  std::optional<double> sensitivity;  // binary only: recall of class 1
  std::optional<double> specificity;  // binary only: recall of class 0
};

ClassificationMetrics classification_metrics(const std::vector<int>& y_true,
                                             const std::vector<int>& y_pred,
                                             int classes = 0);

/// Mann-Whitney AUC: mean over (positive, negative) pairs of
/// [score_p > score_n] + 0.5 [score_p == score_n], computed via midranks.
/// Labels must contain both classes.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// ln(p_m / (1-p_m)) - ln(p_b / (1-p_b)); inputs clamp to
/// [1e-6, 1 - 1e-6]. `clamped`, when given, reports whether any input hit
/// the clamp.
double log_odds_gain(double p_model, double p_base, bool* clamped = nullptr);

/// Largest observed-score threshold t with sensitivity(t) >= target, where
/// positives are predicted when score >= t. Maximizes specificity subject
/// to the sensitivity constraint. Errors when no positives are present.
double calibrate_threshold(const std::vector<double>& scores,
                           const std::vector<int>& labels,
                           double target_sensitivity = 0.8);

struct BootstrapInterval {
  double low = 0.0;
  double high = 0.0;
};

/// 95% percentile bootstrap over sample indices. The statistic receives a
/// resampled index vector (with replacement). Per-resample seeds derive
/// from the master seed, so results are deterministic even when resamples
/// run in parallel.
BootstrapInterval bootstrap_ci(
    std::size_t n_samples,
    const std::function<double(const std::vector<std::size_t>&)>& statistic,
    int n_boot, std::uint64_t seed);

/// Stratified variant: resamples within each stratum so per-class counts are
/// preserved. Keeps rank metrics (AUC) well-defined on every resample.
BootstrapInterval stratified_bootstrap_ci(
    const std::vector<int>& strata,
    const std::function<double(const std::vector<std::size_t>&)>& statistic,
    int n_boot, std::uint64_t seed);

}  // namespace cers
