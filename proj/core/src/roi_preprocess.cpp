// SPDX-License-Identifier: Apache-2.0
#include "cers/roi_preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "cers/errors.hpp"

namespace cers {

FloatImage roi_preprocess(const Thumbnail& image, int out_size) {
  validate(image);
  if (out_size < 1) throw ConfigError("output size must be >= 1");

  FloatImage out;
  out.width = out_size;
  out.height = out_size;
  out.data.resize(3u * static_cast<std::size_t>(out_size) *
                  static_cast<std::size_t>(out_size));

  const double sx = static_cast<double>(image.width) / out_size;
  const double sy = static_cast<double>(image.height) / out_size;
  const std::size_t plane =
      static_cast<std::size_t>(out_size) * static_cast<std::size_t>(out_size);

  for (int y = 0; y < out_size; ++y) {
    // Pixel-center sampling (align_corners = false).
    const double src_y = (y + 0.5) * sy - 0.5;
    const double yc = std::clamp(src_y, 0.0, static_cast<double>(image.height - 1));
    const int y0 = static_cast<int>(std::floor(yc));
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double fy = yc - y0;
    for (int x = 0; x < out_size; ++x) {
      const double src_x = (x + 0.5) * sx - 0.5;
      const double xc = std::clamp(src_x, 0.0, static_cast<double>(image.width - 1));
      const int x0 = static_cast<int>(std::floor(xc));
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double fx = xc - x0;
      for (int c = 0; c < 3; ++c) {
        auto px = [&](int ix, int iy) {
          return static_cast<double>(
              image.pixels[(static_cast<std::size_t>(iy) *
                                static_cast<std::size_t>(image.width) +
                            static_cast<std::size_t>(ix)) *
                               3 +
                           static_cast<std::size_t>(c)]);
        };
        const double top = px(x0, y0) * (1.0 - fx) + px(x1, y0) * fx;
        const double bottom = px(x0, y1) * (1.0 - fx) + px(x1, y1) * fx;
        const double value = top * (1.0 - fy) + bottom * fy;
        const double normalized =
            (value / 255.0 - kImagenetMean[static_cast<std::size_t>(c)]) /
            kImagenetStd[static_cast<std::size_t>(c)];
        out.data[static_cast<std::size_t>(c) * plane +
                 static_cast<std::size_t>(y) * static_cast<std::size_t>(out_size) +
                 static_cast<std::size_t>(x)] = static_cast<float>(normalized);
      }
    }
  }
  return out;
}

}  // namespace cers
