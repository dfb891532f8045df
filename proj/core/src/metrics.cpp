// SPDX-License-Identifier: Apache-2.0
#include "cers/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "cers/errors.hpp"
#include "cers/parallel.hpp"
#include "cers/rng.hpp"

namespace cers {

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

ConfusionMatrix confusion_matrix(const std::vector<int>& y_true,
                                 const std::vector<int>& y_pred, int classes) {
  if (y_true.size() != y_pred.size())
    throw DataError("prediction/label count mismatch");
  if (classes == 0) {
    for (int v : y_true) classes = std::max(classes, v + 1);
    for (int v : y_pred) classes = std::max(classes, v + 1);
  }
  for (int v : y_true)
    if (v < 0 || v >= classes) throw DataError("true label out of range");
  for (int v : y_pred)
    if (v < 0 || v >= classes) throw DataError("predicted label out of range");

  ConfusionMatrix cm;
  cm.classes = classes;
  cm.counts.assign(static_cast<std::size_t>(classes) * static_cast<std::size_t>(classes), 0);
  for (std::size_t i = 0; i < y_true.size(); ++i)
    ++cm.counts[static_cast<std::size_t>(y_true[i]) * static_cast<std::size_t>(classes) +
                static_cast<std::size_t>(y_pred[i])];
  return cm;
}

ClassificationMetrics classification_metrics(const std::vector<int>& y_true,
                                             const std::vector<int>& y_pred,
                                             int classes) {
  if (y_true.empty()) throw DataError("empty evaluation set");
  const ConfusionMatrix cm = confusion_matrix(y_true, y_pred, classes);
  const int c = cm.classes;

  ClassificationMetrics out;
  out.per_class_recall.assign(static_cast<std::size_t>(c),
                              std::numeric_limits<double>::quiet_NaN());
  std::int64_t correct = 0;
  double recall_sum = 0.0;
  int present = 0;
  for (int k = 0; k < c; ++k) {
    std::int64_t row = 0;
    for (int p = 0; p < c; ++p) row += cm.at(k, p);
    correct += cm.at(k, k);
    if (row == 0) {
      out.absent_classes.push_back(k);
      continue;
    }
    const double recall = static_cast<double>(cm.at(k, k)) / static_cast<double>(row);
    out.per_class_recall[static_cast<std::size_t>(k)] = recall;
    recall_sum += recall;
    ++present;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(cm.total());
  out.balanced_accuracy = present > 0 ? recall_sum / present : 0.0;

  auto prf = [&](int positive) {
    std::int64_t tp = cm.at(positive, positive);
    std::int64_t fp = 0, fn = 0;
    for (int k = 0; k < c; ++k) {
      if (k == positive) continue;
      fp += cm.at(k, positive);
      fn += cm.at(positive, k);
    }
    const double precision =
        tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall =
        tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    const double f1 = precision + recall == 0.0
                          ? 0.0
                          : 2.0 * precision * recall / (precision + recall);
    return std::array<double, 3>{precision, recall, f1};
  };

  if (c == 2) {
    const auto [precision, recall, f1] = prf(1);
    out.precision = precision;
    out.f1 = f1;
    if (std::find(out.absent_classes.begin(), out.absent_classes.end(), 1) ==
        out.absent_classes.end())
      out.sensitivity = recall;
    if (!std::isnan(out.per_class_recall[0]))
      out.specificity = out.per_class_recall[0];
  } else {
    // Macro average over classes present in y_true.
    double p_sum = 0.0, f_sum = 0.0;
    int n = 0;
    for (int k = 0; k < c; ++k) {
      if (std::isnan(out.per_class_recall[static_cast<std::size_t>(k)])) continue;
      const auto [precision, recall, f1] = prf(k);
      (void)recall;
      p_sum += precision;
      f_sum += f1;
      ++n;
    }
    out.precision = n > 0 ? p_sum / n : 0.0;
    out.f1 = n > 0 ? f_sum / n : 0.0;
  }
  return out;
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw DataError("score/label count mismatch");
  std::size_t n_pos = 0, n_neg = 0;
  for (int l : labels) {
    if (l == 1) ++n_pos;
    else if (l == 0) ++n_neg;
    else throw DataError("AUC labels must be 0 or 1");
  }
  if (n_pos == 0 || n_neg == 0)
    throw DataError("AUC needs both classes present");

  // Midranks over the pooled scores; tied groups share the average rank.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    // 1-based ranks i+1 .. j+1 share the midrank; sums stay half-integral.
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) rank_sum_pos += midrank;
    i = j + 1;
  }
  const double u = rank_sum_pos - static_cast<double>(n_pos) *
                                      (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double log_odds_gain(double p_model, double p_base, bool* clamped) {
  constexpr double kFloor = 1e-6;
  constexpr double kCeil = 1.0 - 1e-6;
  bool hit = false;
  auto clamp = [&](double p) {
    if (p < kFloor || p > kCeil) hit = true;
    return std::clamp(p, kFloor, kCeil);
  };
  const double pm = clamp(p_model);
  const double pb = clamp(p_base);
  if (clamped != nullptr) *clamped = hit;
  return std::log(pm / (1.0 - pm)) - std::log(pb / (1.0 - pb));
}

double calibrate_threshold(const std::vector<double>& scores,
                           const std::vector<int>& labels,
                           double target_sensitivity) {
  if (scores.size() != labels.size()) throw DataError("score/label count mismatch");
  if (target_sensitivity < 0.0 || target_sensitivity > 1.0)
    throw ConfigError("target sensitivity must be in [0,1]");
  std::vector<double> positives;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (labels[i] == 1) positives.push_back(scores[i]);
  if (positives.empty()) throw DataError("no positive samples to calibrate on");

  const double n_pos = static_cast<double>(positives.size());
  double best = -std::numeric_limits<double>::infinity();
  for (double t : scores) {
    std::size_t captured = 0;
    for (double p : positives)
      if (p >= t) ++captured;
    if (static_cast<double>(captured) / n_pos >= target_sensitivity)
      best = std::max(best, t);
  }
  // target <= 1 with >= 1 positive is always reachable at min positive score.
  return best;
}

BootstrapInterval bootstrap_ci(
    std::size_t n_samples,
    const std::function<double(const std::vector<std::size_t>&)>& statistic,
    int n_boot, std::uint64_t seed) {
  if (n_samples < 2) throw DataError("bootstrap needs at least two samples");
  if (n_boot < 1) throw ConfigError("bootstrap replicate count must be >= 1");

  std::vector<double> stats(static_cast<std::size_t>(n_boot));
  parallel_for(static_cast<std::size_t>(n_boot), [&](std::size_t b) {
    Rng rng(derive_seed(seed, b));
    std::uniform_int_distribution<std::size_t> pick(0, n_samples - 1);
    std::vector<std::size_t> indices(n_samples);
    for (auto& idx : indices) idx = pick(rng);
    stats[b] = statistic(indices);
  });
  std::sort(stats.begin(), stats.end());

  // Linearly interpolated empirical quantiles.
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(stats.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, stats.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return stats[lo] * (1.0 - frac) + stats[hi] * frac;
  };
  return {quantile(0.025), quantile(0.975)};
}

BootstrapInterval stratified_bootstrap_ci(
    const std::vector<int>& strata,
    const std::function<double(const std::vector<std::size_t>&)>& statistic,
    int n_boot, std::uint64_t seed) {
  if (strata.size() < 2) throw DataError("bootstrap needs at least two samples");
  if (n_boot < 1) throw ConfigError("bootstrap replicate count must be >= 1");

  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < strata.size(); ++i) groups[strata[i]].push_back(i);

  std::vector<double> stats(static_cast<std::size_t>(n_boot));
  parallel_for(static_cast<std::size_t>(n_boot), [&](std::size_t b) {
    Rng rng(derive_seed(seed, b));
    std::vector<std::size_t> indices;
    indices.reserve(strata.size());
    for (const auto& [cls, members] : groups) {
      (void)cls;
      std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
      for (std::size_t k = 0; k < members.size(); ++k)
        indices.push_back(members[pick(rng)]);
    }
    stats[b] = statistic(indices);
  });
  std::sort(stats.begin(), stats.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(stats.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, stats.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return stats[lo] * (1.0 - frac) + stats[hi] * frac;
  };
  return {quantile(0.025), quantile(0.975)};
}

}  // namespace cers
