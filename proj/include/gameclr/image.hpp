#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "gameclr/errors.hpp"

namespace gameclr {

inline constexpr int kImageSize = 64;
inline constexpr int kImageChannels = 3;

// H x W x 3 raster, row-major with interleaved channels, values in [0, 1].
struct Image {
  int height = kImageSize;
  int width = kImageSize;
  int channels = kImageChannels;
  std::vector<float> data;

  static Image zeros(int h = kImageSize, int w = kImageSize) {
    Image im;
    im.height = h;
    im.width = w;
    im.data.assign(static_cast<std::size_t>(h) * w * kImageChannels, 0.0f);
    return im;
  }

  float& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  std::size_t value_count() const { return pixel_count() * channels; }

  bool same_shape(const Image& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }
};

inline float clamp01(float v) { return std::clamp(v, 0.0f, 1.0f); }

inline bool images_identical(const Image& a, const Image& b) {
  return a.same_shape(b) && a.data == b.data;
}

inline void require_valid_image(const Image& im) {
  if (im.channels != kImageChannels ||
      im.data.size() != static_cast<std::size_t>(im.height) * im.width * im.channels) {
    throw ShapeMismatch("image buffer does not match its header");
  }
}

}  // namespace gameclr
