// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace cers {

/// Low-resolution RGB slide raster ("thumbnail") with its magnification.
struct Thumbnail {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB, 8 bit per channel
  double scale = 1.25;               // magnification of this raster

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
};

/// Checks the Thumbnail invariants (dims >= 1, scale > 0, buffer size).
void validate(const Thumbnail& thumb);

/// Reads a PNG or binary PPM (P6) file, dispatching on the magic bytes.
Thumbnail read_thumbnail(const std::filesystem::path& path, double scale = 1.25);

void write_ppm(const Thumbnail& thumb, const std::filesystem::path& path);
void write_png(const Thumbnail& thumb, const std::filesystem::path& path);

}  // namespace cers
