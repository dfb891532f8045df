// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <vector>

#include "cers/image.hpp"

namespace cers {

inline constexpr std::array<double, 3> kImagenetMean{0.485, 0.456, 0.406};
inline constexpr std::array<double, 3> kImagenetStd{0.229, 0.224, 0.225};

/// Channel-planar float image (CHW layout).
struct FloatImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // 3 * width * height

  float at(int channel, int x, int y) const {
    return data[static_cast<std::size_t>(channel) * static_cast<std::size_t>(width) *
                    static_cast<std::size_t>(height) +
                static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(x)];
  }
};

/// Bilinear resize to out_size x out_size, then per-channel
/// (x/255 - mean) / std normalization with the ImageNet constants.
FloatImage roi_preprocess(const Thumbnail& image, int out_size = 224);

}  // namespace cers
