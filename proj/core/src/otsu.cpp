// SPDX-License-Identifier: Apache-2.0
#include "cers/otsu.hpp"

namespace cers {

std::optional<int> otsu_split(const std::vector<std::uint64_t>& histogram) {
  const int bins = static_cast<int>(histogram.size());
  double total = 0.0;
  double total_moment = 0.0;
  for (int i = 0; i < bins; ++i) {
    total += static_cast<double>(histogram[static_cast<std::size_t>(i)]);
    total_moment +=
        static_cast<double>(i) * static_cast<double>(histogram[static_cast<std::size_t>(i)]);
  }
  if (total == 0.0) return std::nullopt;

  double best = -1.0;
  int best_first = -1;
  int best_last = -1;
  double w0 = 0.0;
  double m0 = 0.0;
  for (int t = 0; t + 1 < bins; ++t) {
    const double h = static_cast<double>(histogram[static_cast<std::size_t>(t)]);
    w0 += h;
    m0 += static_cast<double>(t) * h;
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double mu0 = m0 / w0;
    const double mu1 = (total_moment - m0) / w1;
    const double variance = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (variance > best) {
      best = variance;
      best_first = t;
      best_last = t;
    } else if (variance == best) {
      best_last = t;
    }
  }
  if (best_first < 0) return std::nullopt;
  return (best_first + best_last) / 2;
}

}  // namespace cers
