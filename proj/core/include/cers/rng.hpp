// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

namespace cers {

using Rng = std::mt19937_64;

/// Forward pass mode. Train mode enables dropout; eval mode is deterministic.
enum class RunMode { train, eval };

/// Derives an independent seed for a named stream from a master seed
/// (splitmix64 mix), so sub-generators never share state.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace cers
