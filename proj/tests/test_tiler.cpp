// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include "cers/errors.hpp"
#include "cers/tiler.hpp"

using namespace cers;

namespace {

Thumbnail solid_image(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  Thumbnail t;
  t.width = w;
  t.height = h;
  t.pixels.resize(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
    t.pixels[3 * i] = r;
    t.pixels[3 * i + 1] = g;
    t.pixels[3 * i + 2] = b;
  }
  return t;
}

void paint_block(Thumbnail& t, int x0, int y0, int x1, int y1, std::uint8_t r,
                 std::uint8_t g, std::uint8_t b) {
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const std::size_t i = (static_cast<std::size_t>(y) * t.width + x) * 3;
      t.pixels[i] = r;
      t.pixels[i + 1] = g;
      t.pixels[i + 2] = b;
    }
}

TissueMask blank_mask(int w, int h) {
  TissueMask m;
  m.width = w;
  m.height = h;
  m.bits.assign(static_cast<std::size_t>(w) * h, 0);
  return m;
}

void set_block(TissueMask& m, int x0, int y0, int x1, int y1) {
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x)
      m.bits[static_cast<std::size_t>(y) * m.width + x] = 1;
}

// Independent 8-connected component counter used as the test oracle.
int count_components(const TissueMask& m) {
  std::vector<char> seen(m.bits.size(), 0);
  int components = 0;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * m.width + x;
      if (!m.bits[idx] || seen[idx]) continue;
      ++components;
      std::queue<std::pair<int, int>> q;
      q.push({x, y});
      seen[idx] = 1;
      while (!q.empty()) {
        auto [cx, cy] = q.front();
        q.pop();
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= m.width || ny >= m.height) continue;
            const std::size_t nidx = static_cast<std::size_t>(ny) * m.width + nx;
            if (m.bits[nidx] && !seen[nidx]) {
              seen[nidx] = 1;
              q.push({nx, ny});
            }
          }
      }
    }
  }
  return components;
}

double window_fraction(const TissueMask& m, std::int64_t x, std::int64_t y,
                       double s, int patch_px) {
  const int win = static_cast<int>(std::ceil(patch_px / s));
  const int mx0 = static_cast<int>(std::floor(x / s));
  const int my0 = static_cast<int>(std::floor(y / s));
  std::int64_t tissue = 0, count = 0;
  for (int my = my0; my < std::min(m.height, my0 + win); ++my)
    for (int mx = mx0; mx < std::min(m.width, mx0 + win); ++mx) {
      tissue += m.bits[static_cast<std::size_t>(my) * m.width + mx];
      ++count;
    }
  return count == 0 ? 0.0 : static_cast<double>(tissue) / count;
}

}  // namespace

TEST_CASE("all-white thumbnail yields an empty mask") {
  const Thumbnail t = solid_image(100, 100, 255, 255, 255);
  const TissueMask mask = segment_tissue(t);
  CHECK(mask.degenerate);
  CHECK(mask.area() == 0);
  // White resolves to background even when the degenerate flag is cleared.
  CHECK(resolve_degenerate(mask).area() == 0);
}

TEST_CASE("uniform pink thumbnail is degenerate and resolves to all tissue") {
  const Thumbnail t = solid_image(100, 100, 200, 120, 160);
  const TissueMask mask = segment_tissue(t);
  CHECK(mask.degenerate);
  CHECK(mask.area() == 0);
  const TissueMask resolved = resolve_degenerate(mask);
  CHECK_FALSE(resolved.degenerate);
  CHECK(resolved.area() == 100 * 100);
}

TEST_CASE("pink block on white segments to the block area") {
  Thumbnail t = solid_image(100, 100, 255, 255, 255);
  paint_block(t, 30, 30, 70, 70, 200, 120, 160);
  // Pixel-count oracle over the generated image.
  std::size_t painted = 0;
  for (std::size_t i = 0; i < t.pixel_count(); ++i)
    if (t.pixels[3 * i] != 255) ++painted;
  CHECK(painted == 1600);

  const TissueMask mask = segment_tissue(t);
  CHECK_FALSE(mask.degenerate);
  CHECK(std::abs(static_cast<double>(mask.area()) - 1600.0) <= 0.05 * 1600.0);
}

TEST_CASE("refine removes a 1-px speck") {
  TissueMask m = blank_mask(32, 32);
  m.bits[16 * 32 + 16] = 1;
  CHECK(refine_mask(m).area() == 0);
}

TEST_CASE("refine keeps a solid disk nearly intact") {
  TissueMask m = blank_mask(128, 128);
  std::size_t disk_area = 0;
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x)
      if ((x - 64) * (x - 64) + (y - 64) * (y - 64) <= 50 * 50) {
        m.bits[static_cast<std::size_t>(y) * 128 + x] = 1;
        ++disk_area;
      }
  const TissueMask out = refine_mask(m);
  CHECK(count_components(out) == 1);
  // Closing is idempotent on a convex blob; only a thin boundary band of
  // about perimeter x median radius may move.
  const double band = 2.0 * 3.14159265 * 50.0 * 3.0;
  CHECK(std::abs(static_cast<double>(out.area()) - static_cast<double>(disk_area)) <=
        band);
}

TEST_CASE("closing bridges a 2-px gap between blocks") {
  TissueMask m = blank_mask(64, 64);
  set_block(m, 10, 20, 30, 40);  // 20x20
  set_block(m, 32, 20, 52, 40);  // 2-px gap at x in [30, 32)
  CHECK(count_components(m) == 2);
  const TissueMask out = refine_mask(m);
  CHECK(count_components(out) == 1);
}

TEST_CASE("refine maps empty masks to empty masks") {
  CHECK(refine_mask(blank_mask(16, 16)).area() == 0);
}

TEST_CASE("patch grid over an empty mask is empty") {
  const PatchGrid grid = extract_patch_grid(blank_mask(64, 64), 1.25, 20.0, 256, 0.5);
  CHECK(grid.coords.empty());
}

TEST_CASE("full 64x64 mask at 16x scale gives a 4x4 grid of 256-px patches") {
  TissueMask m = blank_mask(64, 64);
  set_block(m, 0, 0, 64, 64);
  const PatchGrid grid = extract_patch_grid(m, 1.25, 20.0, 256, 0.5);
  // floor(64 * 16 / 256)^2 = 16.
  REQUIRE(grid.coords.size() == 16);
  std::set<std::pair<std::int64_t, std::int64_t>> seen;
  for (const auto& c : grid.coords) {
    CHECK(c[0] % 256 == 0);
    CHECK(c[1] % 256 == 0);
    CHECK(c[0] < 1024);
    CHECK(c[1] < 1024);
    seen.insert({c[0], c[1]});
  }
  CHECK(seen.size() == 16);
  for (double f : grid.tissue_frac) CHECK(f == 1.0);
}

TEST_CASE("left-half tissue keeps exactly the left patch columns") {
  TissueMask m = blank_mask(64, 64);
  set_block(m, 0, 0, 32, 64);
  const PatchGrid grid = extract_patch_grid(m, 1.25, 20.0, 256, 0.5);
  REQUIRE(grid.coords.size() == 8);
  for (const auto& c : grid.coords) CHECK(c[0] < 512);
}

TEST_CASE("windows with tissue fraction exactly at the cutoff are included") {
  TissueMask m = blank_mask(64, 64);
  set_block(m, 0, 0, 24, 64);  // window [16,32) is half covered
  const PatchGrid grid = extract_patch_grid(m, 1.25, 20.0, 256, 0.5);
  bool found_boundary = false;
  for (std::size_t i = 0; i < grid.coords.size(); ++i)
    if (grid.coords[i][0] == 256) {
      found_boundary = true;
      CHECK(grid.tissue_frac[i] == 0.5);
    }
  CHECK(found_boundary);
}

TEST_CASE("scale factor must be positive") {
  CHECK_THROWS_AS(extract_patch_grid(blank_mask(8, 8), -1.0, 20.0, 256, 0.5),
                  ConfigError);
}

TEST_CASE("fraction sampling sizes match the stated protocol") {
  PatchGrid grid;
  grid.patch_px = 256;
  for (int i = 0; i < 99; ++i) {
    grid.coords.push_back({i * 256, 0});
    grid.tissue_frac.push_back(1.0);
  }
  CHECK(sample_patch_subset(grid, SampleStrategy::Fraction(1.0 / 3.0), 7).coords.size() ==
        33);

  grid.coords.resize(20);
  grid.tissue_frac.resize(20);
  CHECK(sample_patch_subset(grid, SampleStrategy::Fraction(0.5), 7).coords.size() == 10);

  grid.coords.resize(300);
  grid.tissue_frac.resize(300);
  for (int i = 0; i < 300; ++i) grid.coords[static_cast<std::size_t>(i)] = {i * 256, 0};
  CHECK(sample_patch_subset(grid, SampleStrategy::FixedCount(500), 7).coords.size() ==
        300);
}

TEST_CASE("grid invariants hold over random masks") {
  std::mt19937_64 rng(20240817);
  for (int trial = 0; trial < 100; ++trial) {
    TissueMask m = blank_mask(48, 48);
    std::uniform_int_distribution<int> coin(0, 99);
    std::uniform_int_distribution<int> pos(0, 40);
    const int blobs = 1 + trial % 4;
    for (int b = 0; b < blobs; ++b) {
      const int x0 = pos(rng), y0 = pos(rng);
      set_block(m, x0, y0, std::min(48, x0 + 4 + coin(rng) % 12),
                std::min(48, y0 + 4 + coin(rng) % 12));
    }
    const double min_frac = (coin(rng) % 10) / 10.0;
    const PatchGrid grid = extract_patch_grid(m, 1.25, 20.0, 256, min_frac);

    std::set<std::pair<std::int64_t, std::int64_t>> seen;
    for (std::size_t i = 0; i < grid.coords.size(); ++i) {
      const auto& c = grid.coords[i];
      CHECK(c[0] % 256 == 0);  // non-overlap by construction
      CHECK(c[1] % 256 == 0);
      CHECK(seen.insert({c[0], c[1]}).second);
      // Containment: the recorded fraction is recomputable and above cutoff.
      const double frac = window_fraction(m, c[0], c[1], 16.0, 256);
      CHECK(grid.tissue_frac[i] == doctest::Approx(frac).epsilon(1e-12));
      CHECK(grid.tissue_frac[i] >= min_frac);
    }

    // Determinism.
    const PatchGrid again = extract_patch_grid(m, 1.25, 20.0, 256, min_frac);
    CHECK(again.coords == grid.coords);

    // Monotonicity: lowering the cutoff never drops a patch.
    if (min_frac > 0.0) {
      const PatchGrid wider = extract_patch_grid(m, 1.25, 20.0, 256, min_frac / 2.0);
      std::set<std::pair<std::int64_t, std::int64_t>> wide_set;
      for (const auto& c : wider.coords) wide_set.insert({c[0], c[1]});
      for (const auto& c : grid.coords)
        CHECK(wide_set.count({c[0], c[1]}) == 1);
    }

    // Subset sampling is deterministic and preserves pairs.
    if (!grid.coords.empty()) {
      const auto sub1 = sample_patch_subset(grid, SampleStrategy::Fraction(0.5), 99);
      const auto sub2 = sample_patch_subset(grid, SampleStrategy::Fraction(0.5), 99);
      CHECK(sub1.coords == sub2.coords);
      CHECK(sub1.tissue_frac == sub2.tissue_frac);
    }
  }
}

TEST_CASE("patch csv has the declared header and row count") {
  PatchGrid grid;
  grid.coords = {{0, 0}, {256, 0}};
  grid.tissue_frac = {1.0, 0.625};
  std::ostringstream out;
  write_patch_csv(grid, out);
  CHECK(out.str() == "x,y,tissue_frac\n0,0,1\n256,0,0.625\n");
}

TEST_CASE("thumbnail io round-trips through ppm and png") {
  Thumbnail t = solid_image(13, 9, 10, 20, 30);
  paint_block(t, 2, 3, 7, 6, 200, 120, 160);

  const auto dir = std::filesystem::temp_directory_path() / "cers_tiler_test";
  std::filesystem::create_directories(dir);

  write_ppm(t, dir / "img.ppm");
  const Thumbnail ppm = read_thumbnail(dir / "img.ppm", 1.25);
  CHECK(ppm.width == t.width);
  CHECK(ppm.height == t.height);
  CHECK(ppm.pixels == t.pixels);

  write_png(t, dir / "img.png");
  const Thumbnail png = read_thumbnail(dir / "img.png", 1.25);
  CHECK(png.width == t.width);
  CHECK(png.height == t.height);
  CHECK(png.pixels == t.pixels);

  std::filesystem::remove_all(dir);
}
