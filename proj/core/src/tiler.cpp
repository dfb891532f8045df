// SPDX-License-Identifier: Apache-2.0
#include "cers/tiler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <queue>
#include <random>

#include "cers/errors.hpp"
#include "cers/otsu.hpp"
#include "cers/rng.hpp"

namespace cers {

namespace {

std::size_t mask_index(const TissueMask& m, int x, int y) {
  return static_cast<std::size_t>(y) * static_cast<std::size_t>(m.width) +
         static_cast<std::size_t>(x);
}

void validate_mask(const TissueMask& m) {
  if (m.width < 1 || m.height < 1) throw DataError("mask dimensions must be >= 1");
  if (m.bits.size() != static_cast<std::size_t>(m.width) * static_cast<std::size_t>(m.height))
    throw DataError("mask bit buffer size mismatch");
}

TissueMask median_filter(const TissueMask& in, int window) {
  if (window <= 1) return in;
  const int r = window / 2;
  TissueMask out = in;
  // Row-sum integral image keeps this O(w*h) independent of window size.
  const int w = in.width, h = in.height;
  std::vector<std::int32_t> integral(static_cast<std::size_t>(w + 1) *
                                     static_cast<std::size_t>(h + 1));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      integral[static_cast<std::size_t>(y + 1) * static_cast<std::size_t>(w + 1) + x + 1] =
          integral[static_cast<std::size_t>(y) * static_cast<std::size_t>(w + 1) + x + 1] +
          integral[static_cast<std::size_t>(y + 1) * static_cast<std::size_t>(w + 1) + x] -
          integral[static_cast<std::size_t>(y) * static_cast<std::size_t>(w + 1) + x] +
          in.bits[mask_index(in, x, y)];
    }
  }
  auto box_sum = [&](int x0, int y0, int x1, int y1) {  // inclusive box
    return integral[static_cast<std::size_t>(y1 + 1) * static_cast<std::size_t>(w + 1) + x1 + 1] -
           integral[static_cast<std::size_t>(y0) * static_cast<std::size_t>(w + 1) + x1 + 1] -
           integral[static_cast<std::size_t>(y1 + 1) * static_cast<std::size_t>(w + 1) + x0] +
           integral[static_cast<std::size_t>(y0) * static_cast<std::size_t>(w + 1) + x0];
  };
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r);
      const int count = (x1 - x0 + 1) * (y1 - y0 + 1);
      const int ones = box_sum(x0, y0, x1, y1);
      // Majority over the in-bounds window; exact half rounds to background.
      out.bits[mask_index(out, x, y)] = static_cast<std::uint8_t>(2 * ones > count);
    }
  }
  return out;
}

std::vector<std::array<int, 2>> disk_offsets(int radius) {
  std::vector<std::array<int, 2>> offsets;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dx * dx + dy * dy <= radius * radius) offsets.push_back({dx, dy});
  return offsets;
}

TissueMask dilate(const TissueMask& in, const std::vector<std::array<int, 2>>& se) {
  TissueMask out = in;
  std::fill(out.bits.begin(), out.bits.end(), std::uint8_t{0});
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      if (!in.bits[mask_index(in, x, y)]) continue;
      for (const auto& [dx, dy] : se) {
        const int nx = x + dx, ny = y + dy;
        if (nx >= 0 && ny >= 0 && nx < in.width && ny < in.height)
          out.bits[mask_index(out, nx, ny)] = 1;
      }
    }
  }
  return out;
}

TissueMask erode(const TissueMask& in, const std::vector<std::array<int, 2>>& se) {
  TissueMask out = in;
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      bool keep = true;
      for (const auto& [dx, dy] : se) {
        const int nx = x + dx, ny = y + dy;
        // Outside the frame counts as background, so border tissue erodes.
        if (nx < 0 || ny < 0 || nx >= in.width || ny >= in.height ||
            !in.bits[mask_index(in, nx, ny)]) {
          keep = false;
          break;
        }
      }
      out.bits[mask_index(out, x, y)] = static_cast<std::uint8_t>(keep);
    }
  }
  return out;
}

// Label connected components of `value` pixels. 8-connectivity for tissue,
// 4-connectivity for background (the usual dual pair).
struct Components {
  std::vector<std::int32_t> label;  // -1 = not part of any component
  std::vector<std::int64_t> area;
  std::vector<bool> touches_border;
};

Components label_components(const TissueMask& m, std::uint8_t value, bool eight_connected) {
  Components comps;
  comps.label.assign(m.bits.size(), -1);
  static const int dx8[] = {1, -1, 0, 0, 1, 1, -1, -1};
  static const int dy8[] = {0, 0, 1, -1, 1, -1, 1, -1};
  const int n_dirs = eight_connected ? 8 : 4;
  std::queue<std::array<int, 2>> frontier;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const std::size_t idx = mask_index(m, x, y);
      if (m.bits[idx] != value || comps.label[idx] >= 0) continue;
      const std::int32_t id = static_cast<std::int32_t>(comps.area.size());
      comps.area.push_back(0);
      comps.touches_border.push_back(false);
      comps.label[idx] = id;
      frontier.push({x, y});
      while (!frontier.empty()) {
        const auto [cx, cy] = frontier.front();
        frontier.pop();
        ++comps.area[static_cast<std::size_t>(id)];
        if (cx == 0 || cy == 0 || cx == m.width - 1 || cy == m.height - 1)
          comps.touches_border[static_cast<std::size_t>(id)] = true;
        for (int d = 0; d < n_dirs; ++d) {
          const int nx = cx + dx8[d], ny = cy + dy8[d];
          if (nx < 0 || ny < 0 || nx >= m.width || ny >= m.height) continue;
          const std::size_t nidx = mask_index(m, nx, ny);
          if (m.bits[nidx] == value && comps.label[nidx] < 0) {
            comps.label[nidx] = id;
            frontier.push({nx, ny});
          }
        }
      }
    }
  }
  return comps;
}

}  // namespace

std::size_t TissueMask::area() const {
  return static_cast<std::size_t>(
      std::accumulate(bits.begin(), bits.end(), std::size_t{0}));
}

TissueMask segment_tissue(const Thumbnail& thumb) {
  validate(thumb);
  TissueMask mask;
  mask.width = thumb.width;
  mask.height = thumb.height;
  mask.bits.assign(thumb.pixel_count(), 0);

  // Background distance: white background scores 0, any stain scores high.
  std::vector<std::uint8_t> channel(thumb.pixel_count());
  std::vector<std::uint64_t> hist(256, 0);
  for (std::size_t i = 0; i < thumb.pixel_count(); ++i) {
    const std::uint8_t r = thumb.pixels[3 * i];
    const std::uint8_t g = thumb.pixels[3 * i + 1];
    const std::uint8_t b = thumb.pixels[3 * i + 2];
    const std::uint8_t v = static_cast<std::uint8_t>(255 - std::min({r, g, b}));
    channel[i] = v;
    ++hist[v];
  }

  const std::optional<int> split = otsu_split(hist);
  if (!split) {
    mask.degenerate = true;
    mask.uniform_value = channel.empty() ? 0 : channel[0];
    return mask;
  }
  for (std::size_t i = 0; i < channel.size(); ++i)
    mask.bits[i] = static_cast<std::uint8_t>(channel[i] > *split);
  return mask;
}

TissueMask resolve_degenerate(const TissueMask& mask) {
  if (!mask.degenerate) return mask;
  TissueMask out = mask;
  out.degenerate = false;
  std::fill(out.bits.begin(), out.bits.end(),
            static_cast<std::uint8_t>(mask.uniform_value > 0));
  return out;
}

TissueMask refine_mask(const TissueMask& mask, const RefineParams& params) {
  validate_mask(mask);
  TissueMask out = median_filter(mask, params.median_window);
  if (params.closing_radius > 0) {
    const auto se = disk_offsets(params.closing_radius);
    out = erode(dilate(out, se), se);
  }

  // Drop specks below the minimum component area.
  {
    const Components comps = label_components(out, 1, /*eight_connected=*/true);
    for (std::size_t i = 0; i < out.bits.size(); ++i) {
      if (!out.bits[i]) continue;
      if (comps.area[static_cast<std::size_t>(comps.label[i])] <
          params.min_component_area)
        out.bits[i] = 0;
    }
  }
  // Fill interior holes below the minimum hole area.
  {
    const Components comps = label_components(out, 0, /*eight_connected=*/false);
    for (std::size_t i = 0; i < out.bits.size(); ++i) {
      if (out.bits[i]) continue;
      const std::int32_t id = comps.label[i];
      if (!comps.touches_border[static_cast<std::size_t>(id)] &&
          comps.area[static_cast<std::size_t>(id)] < params.min_hole_area)
        out.bits[i] = 1;
    }
  }
  return out;
}

PatchGrid extract_patch_grid(const TissueMask& mask, double thumb_mag,
                             double target_mag, int patch_px,
                             double min_tissue_frac) {
  validate_mask(mask);
  if (!(thumb_mag > 0.0) || !(target_mag > 0.0))
    throw ConfigError("magnifications must be > 0");
  const double s = target_mag / thumb_mag;
  if (!(s > 0.0)) throw ConfigError("scale factor must be > 0");
  if (patch_px < 1) throw ConfigError("patch size must be >= 1");
  if (min_tissue_frac < 0.0 || min_tissue_frac > 1.0)
    throw ConfigError("min_tissue_frac must be in [0,1]");

  PatchGrid grid;
  grid.patch_px = patch_px;
  grid.target_mag = target_mag;

  const std::int64_t full_w = static_cast<std::int64_t>(
      std::floor(static_cast<double>(mask.width) * s));
  const std::int64_t full_h = static_cast<std::int64_t>(
      std::floor(static_cast<double>(mask.height) * s));
  const std::int64_t nx = full_w / patch_px;
  const std::int64_t ny = full_h / patch_px;
  const int win = static_cast<int>(std::ceil(static_cast<double>(patch_px) / s));

  for (std::int64_t j = 0; j < ny; ++j) {
    for (std::int64_t i = 0; i < nx; ++i) {
      const std::int64_t x = i * patch_px;
      const std::int64_t y = j * patch_px;
      const int mx0 = static_cast<int>(std::floor(static_cast<double>(x) / s));
      const int my0 = static_cast<int>(std::floor(static_cast<double>(y) / s));
      const int mx1 = std::min(mask.width, mx0 + win);
      const int my1 = std::min(mask.height, my0 + win);
      std::int64_t tissue = 0;
      std::int64_t count = 0;
      for (int my = my0; my < my1; ++my) {
        for (int mx = mx0; mx < mx1; ++mx) {
          tissue += mask.bits[mask_index(mask, mx, my)];
          ++count;
        }
      }
      if (count == 0) continue;
      const double frac = static_cast<double>(tissue) / static_cast<double>(count);
      if (frac >= min_tissue_frac) {
        grid.coords.push_back({x, y});
        grid.tissue_frac.push_back(frac);
      }
    }
  }
  return grid;
}

PatchGrid sample_patch_subset(const PatchGrid& grid, const SampleStrategy& strategy,
                              std::uint64_t seed) {
  std::size_t want = 0;
  if (strategy.kind == SampleStrategy::Kind::fraction) {
    if (!(strategy.fraction > 0.0) || strategy.fraction > 1.0)
      throw ConfigError("sampling fraction must be in (0,1]");
    want = static_cast<std::size_t>(
        std::llround(strategy.fraction * static_cast<double>(grid.coords.size())));
  } else {
    want = strategy.count;
  }
  want = std::min(want, grid.coords.size());

  std::vector<std::size_t> all(grid.coords.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> picked;
  picked.reserve(want);
  Rng rng(seed);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), want, rng);

  PatchGrid out;
  out.patch_px = grid.patch_px;
  out.target_mag = grid.target_mag;
  for (std::size_t idx : picked) {  // std::sample keeps ascending order
    out.coords.push_back(grid.coords[idx]);
    out.tissue_frac.push_back(grid.tissue_frac[idx]);
  }
  return out;
}

void write_patch_csv(const PatchGrid& grid, std::ostream& out) {
  out << "x,y,tissue_frac\n";
  char buf[64];
  for (std::size_t i = 0; i < grid.coords.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g", grid.tissue_frac[i]);
    out << grid.coords[i][0] << ',' << grid.coords[i][1] << ',' << buf << '\n';
  }
}

}  // namespace cers
