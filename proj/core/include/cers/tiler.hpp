// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <vector>

#include "cers/image.hpp"

namespace cers {

/// Binary tissue mask on the thumbnail lattice.
struct TissueMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // 0 = background, 1 = tissue

  /// Set when the source image had no bimodality (all channel values equal),
  /// so Otsu could not pick a threshold. `bits` is empty-of-tissue in that
  /// case and `uniform_value` holds the constant background-distance value;
  /// the caller decides how to resolve (see resolve_degenerate).
  bool degenerate = false;
  std::uint8_t uniform_value = 0;

  std::size_t area() const;
};

struct RefineParams {
  int median_window = 7;     // odd box side for the binary median filter
  int closing_radius = 4;    // disk radius for morphological closing
  int min_component_area = 64;
  int min_hole_area = 64;
};

/// Non-overlapping patch grid in target-magnification pixel coordinates.
struct PatchGrid {
  int patch_px = 256;
  double target_mag = 20.0;
  std::vector<std::array<std::int64_t, 2>> coords;  // top-left corners
  std::vector<double> tissue_frac;                  // aligned with coords
};

/// Strategy for sample_patch_subset: keep a fraction of the grid or a fixed
/// number of patches (clamped to the grid size).
struct SampleStrategy {
  enum class Kind { fraction, fixed_count };
  Kind kind = Kind::fraction;
  double fraction = 1.0;
  std::size_t count = 0;

  static SampleStrategy Fraction(double f) {
    return {Kind::fraction, f, 0};
  }
  static SampleStrategy FixedCount(std::size_t n) {
    return {Kind::fixed_count, 1.0, n};
  }
};

/// Thresholds the background-distance channel 255 - min(R,G,B) with Otsu.
/// A pixel is tissue when its channel value exceeds the selected threshold.
TissueMask segment_tissue(const Thumbnail& thumb);

/// Policy for degenerate (uniform) inputs: uniform non-background resolves
/// to an all-tissue mask, uniform background stays empty. Non-degenerate
/// masks pass through unchanged.
TissueMask resolve_degenerate(const TissueMask& mask);

/// Median blur, morphological closing, then small-component removal and
/// small-hole filling. Empty masks map to empty masks.
TissueMask refine_mask(const TissueMask& mask, const RefineParams& params = {});

/// Emits every non-overlapping patch_px window (at target magnification)
/// whose mask window has tissue fraction >= min_tissue_frac.
PatchGrid extract_patch_grid(const TissueMask& mask, double thumb_mag,
                             double target_mag, int patch_px,
                             double min_tissue_frac);

/// Uniform random subset without replacement, deterministic under seed.
/// Surviving patches keep their grid order.
PatchGrid sample_patch_subset(const PatchGrid& grid, const SampleStrategy& strategy,
                              std::uint64_t seed);

/// CSV with header `x,y,tissue_frac`.
void write_patch_csv(const PatchGrid& grid, std::ostream& out);

}  // namespace cers
