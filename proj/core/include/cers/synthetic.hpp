// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "cers/bag.hpp"

namespace cers {

/// Desk-scale oracle dataset. Negative bags draw every instance from a
/// standard normal. Positive bags mean-shift `signal_count` instances by
/// `separation` along axis 1. OOD bags mean-shift all instances by
/// `ood_shift` along axis 2, so the three populations live on orthogonal
/// axes and Bayes behavior is computable by hand.
struct SyntheticSpec {
  int bags_per_class = 100;
  int instances_per_bag = 50;
  int dim = 32;
  int signal_count = 3;     // signal instances per positive bag
  double separation = 6.0;  // mean shift of signal instances (axis 1)
  double ood_shift = 6.0;   // mean shift of OOD bags (axis 2)
  int ood_bags = 0;
  std::uint64_t seed = 0;
};

struct SyntheticBag {
  EmbeddingBag bag;
  std::vector<int> signal_indices;  // ground-truth signal positions
};

struct SyntheticDataset {
  std::vector<SyntheticBag> labeled;  // negatives (label 0) then positives (label 1)
  std::vector<SyntheticBag> ood;      // unlabeled
};

SyntheticDataset generate_synthetic_bags(const SyntheticSpec& spec);

}  // namespace cers
