// SPDX-License-Identifier: Apache-2.0
#include "cers/splits.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include "cers/errors.hpp"
#include "cers/rng.hpp"

namespace cers {

std::vector<std::size_t> DatasetSplit::fold_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> DatasetSplit::complement_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] != fold) out.push_back(i);
  return out;
}

DatasetSplit stratified_kfold(const std::vector<int>& labels, int k,
                              std::uint64_t seed) {
  if (k < 2) throw ConfigError("k-fold requires k >= 2");
  if (static_cast<std::size_t>(k) > labels.size())
    throw DataError("k exceeds the number of samples");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  DatasetSplit split;
  split.fold_of.assign(labels.size(), -1);
  split.k = k;
  split.seed = seed;

  // Round-robin within each shuffled class; stagger the starting fold by the
  // cumulative count so no fold systematically collects the remainders.
  std::size_t assigned = 0;
  std::uint64_t stream = 0;
  for (auto& [cls, indices] : by_class) {
    (void)cls;
    Rng rng(derive_seed(seed, stream++));
    std::shuffle(indices.begin(), indices.end(), rng);
    for (std::size_t i = 0; i < indices.size(); ++i)
      split.fold_of[indices[i]] =
          static_cast<int>((assigned + i) % static_cast<std::size_t>(k));
    assigned += indices.size();
  }
  return split;
}

std::vector<std::size_t> few_shot_sample(const std::vector<int>& labels,
                                         int k_per_class, std::uint64_t seed) {
  if (k_per_class < 0) throw ConfigError("k_per_class must be >= 0");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  std::vector<std::size_t> picked;
  std::uint64_t stream = 0;
  for (auto& [cls, indices] : by_class) {
    if (indices.size() < static_cast<std::size_t>(k_per_class))
      throw DataError("class " + std::to_string(cls) + " has " +
                      std::to_string(indices.size()) + " samples, need " +
                      std::to_string(k_per_class));
    Rng rng(derive_seed(seed, stream++));
    std::sample(indices.begin(), indices.end(), std::back_inserter(picked),
                k_per_class, rng);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace cers
