// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace cers {

/// Otsu's threshold over a histogram: returns the split index t that
/// maximizes between-class variance, with bins <= t in the low class.
/// Ties (a plateau of maximizers) resolve to the plateau midpoint.
/// Returns nullopt when no split leaves both classes non-empty.
std::optional<int> otsu_split(const std::vector<std::uint64_t>& histogram);

}  // namespace cers
