// SPDX-License-Identifier: Apache-2.0
#include "cers/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>

#include "cers/errors.hpp"
#include "cers/rng.hpp"

namespace cers {

namespace {

std::string bag_name(const char* prefix, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04d", prefix, index);
  return buf;
}

SyntheticBag make_bag(const SyntheticSpec& spec, const std::string& slide_id,
                      std::optional<std::int32_t> label, int n_signal,
                      double ood_shift, std::uint64_t bag_seed) {
  Rng rng(bag_seed);
  SyntheticBag out;
  out.bag.slide_id = slide_id;
  out.bag.dim = static_cast<std::uint32_t>(spec.dim);
  out.bag.label = label;

  const int n = spec.instances_per_bag;
  if (n_signal > 0) {
    std::vector<int> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    std::sample(all.begin(), all.end(), std::back_inserter(out.signal_indices),
                n_signal, rng);
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  out.bag.coords.resize(static_cast<std::size_t>(n));
  out.bag.values.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(spec.dim));
  for (int i = 0; i < n; ++i) {
    out.bag.coords[static_cast<std::size_t>(i)] = {(i % 16) * 256, (i / 16) * 256};
    for (int d = 0; d < spec.dim; ++d)
      out.bag.values[static_cast<std::size_t>(i) * static_cast<std::size_t>(spec.dim) +
                     static_cast<std::size_t>(d)] = static_cast<float>(normal(rng));
  }
  for (int i : out.signal_indices)
    out.bag.values[static_cast<std::size_t>(i) * static_cast<std::size_t>(spec.dim) + 1] +=
        static_cast<float>(spec.separation);
  if (ood_shift != 0.0)
    for (int i = 0; i < n; ++i)
      out.bag.values[static_cast<std::size_t>(i) * static_cast<std::size_t>(spec.dim) + 2] +=
          static_cast<float>(ood_shift);
  return out;
}

}  // namespace

SyntheticDataset generate_synthetic_bags(const SyntheticSpec& spec) {
  if (spec.bags_per_class < 1 || spec.instances_per_bag < 1 || spec.dim < 1 ||
      spec.signal_count < 1)
    throw ConfigError("synthetic spec fields must be positive");
  if (spec.separation < 0.0 || spec.ood_shift < 0.0)
    throw ConfigError("synthetic shifts must be >= 0");
  if (spec.signal_count > spec.instances_per_bag)
    throw ConfigError("signal_count exceeds instances_per_bag");
  if (spec.dim < 2) throw ConfigError("signal axis requires dim >= 2");
  if (spec.ood_bags > 0 && spec.dim < 3)
    throw ConfigError("OOD axis requires dim >= 3");
  if (spec.ood_bags < 0) throw ConfigError("ood_bags must be >= 0");

  SyntheticDataset data;
  std::uint64_t stream = 0;
  for (int i = 0; i < spec.bags_per_class; ++i)
    data.labeled.push_back(make_bag(spec, bag_name("neg", i), 0, 0, 0.0,
                                    derive_seed(spec.seed, stream++)));
  for (int i = 0; i < spec.bags_per_class; ++i)
    data.labeled.push_back(make_bag(spec, bag_name("pos", i), 1, spec.signal_count,
                                    0.0, derive_seed(spec.seed, stream++)));
  for (int i = 0; i < spec.ood_bags; ++i)
    data.ood.push_back(make_bag(spec, bag_name("ood", i), std::nullopt, 0,
                                spec.ood_shift, derive_seed(spec.seed, stream++)));
  return data;
}

}  // namespace cers
