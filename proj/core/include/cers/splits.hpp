// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

namespace cers {

/// Stratified fold assignment: folds are disjoint, cover every index, and
/// per-class counts across folds differ by at most one.
struct DatasetSplit {
  std::vector<int> fold_of;  // per-sample fold index in [0, k)
  int k = 0;
  std::uint64_t seed = 0;

  std::vector<std::size_t> fold_indices(int fold) const;
  std::vector<std::size_t> complement_indices(int fold) const;
};

DatasetSplit stratified_kfold(const std::vector<int>& labels, int k,
                              std::uint64_t seed);

/// Exactly k_per_class indices per class, uniform without replacement,
/// returned in ascending order. Errors name the class that is too small.
std::vector<std::size_t> few_shot_sample(const std::vector<int>& labels,
                                         int k_per_class, std::uint64_t seed);

}  // namespace cers
