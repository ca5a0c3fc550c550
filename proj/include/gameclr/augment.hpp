#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "gameclr/errors.hpp"
#include "gameclr/image.hpp"
#include "gameclr/rng.hpp"

namespace gameclr {

struct AugmentPolicy {
  double p_flip = 0.05;
  double brightness_delta_max = 0.2;
  double noise_sigma = 0.05;
  double max_rotate = 0.1;  // radians
  double crop_scale_min = 0.8;
};

inline void require_valid_policy(const AugmentPolicy& p) {
  if (!(p.p_flip >= 0.0 && p.p_flip <= 1.0)) throw InvalidPolicy("p_flip must be in [0,1]");
  if (!(p.brightness_delta_max >= 0.0)) throw InvalidPolicy("brightness_delta_max must be >= 0");
  if (!(p.noise_sigma >= 0.0)) throw InvalidPolicy("noise_sigma must be >= 0");
  if (!(p.max_rotate >= 0.0)) throw InvalidPolicy("max_rotate must be >= 0");
  if (!(p.crop_scale_min > 0.0 && p.crop_scale_min <= 1.0))
    throw InvalidPolicy("crop_scale_min must be in (0,1]");
}

namespace detail {

inline double bilinear(const Image& im, double sy, double sx, int c) {
  sx = std::clamp(sx, 0.0, static_cast<double>(im.width - 1));
  sy = std::clamp(sy, 0.0, static_cast<double>(im.height - 1));
  const int x0 = static_cast<int>(sx);
  const int y0 = static_cast<int>(sy);
  const int x1 = std::min(x0 + 1, im.width - 1);
  const int y1 = std::min(y0 + 1, im.height - 1);
  const double fx = sx - x0;
  const double fy = sy - y0;
  const double top = im.at(y0, x0, c) * (1.0 - fx) + im.at(y0, x1, c) * fx;
  const double bot = im.at(y1, x0, c) * (1.0 - fx) + im.at(y1, x1, c) * fx;
  return top * (1.0 - fy) + bot * fy;
}

}  // namespace detail

// Pixel-space augmentation: flip, brightness, noise, rotate, crop, in that
// order. Stages whose magnitude is exactly zero are skipped outright, which
// makes the all-zero policy the bit-exact identity map.
inline Image augment_image(const Image& x, const AugmentPolicy& policy, std::uint64_t seed) {
  require_valid_image(x);
  require_valid_policy(policy);
  Rng rng(seed);
  Image out = x;

  if (rng.bernoulli(policy.p_flip)) {
    Image flipped = out;
    for (int y = 0; y < out.height; ++y)
      for (int xx = 0; xx < out.width; ++xx)
        for (int c = 0; c < out.channels; ++c)
          flipped.at(y, xx, c) = out.at(y, out.width - 1 - xx, c);
    out = std::move(flipped);
  }

  if (policy.brightness_delta_max > 0.0) {
    const double delta = rng.uniform(-policy.brightness_delta_max, policy.brightness_delta_max);
    for (auto& v : out.data) v = static_cast<float>(v + delta);
  }

  if (policy.noise_sigma > 0.0) {
    for (auto& v : out.data) v = static_cast<float>(v + rng.normal(0.0, policy.noise_sigma));
  }

  if (policy.max_rotate > 0.0) {
    const double angle = rng.uniform(-policy.max_rotate, policy.max_rotate);
    const double cs = std::cos(angle);
    const double sn = std::sin(angle);
    const double cx = (out.width - 1) / 2.0;
    const double cy = (out.height - 1) / 2.0;
    Image rotated = Image::zeros();
    for (int y = 0; y < out.height; ++y)
      for (int xx = 0; xx < out.width; ++xx) {
        const double dx = xx - cx;
        const double dy = y - cy;
        const double sx = cx + cs * dx + sn * dy;
        const double sy = cy - sn * dx + cs * dy;
        for (int c = 0; c < out.channels; ++c)
          rotated.at(y, xx, c) = static_cast<float>(detail::bilinear(out, sy, sx, c));
      }
    out = std::move(rotated);
  }

  if (policy.crop_scale_min < 1.0) {
    const double scale = rng.uniform(policy.crop_scale_min, 1.0);
    const double span = scale * out.width;
    const double ox = rng.uniform(0.0, out.width - span);
    const double oy = rng.uniform(0.0, out.height - span);
    Image cropped = Image::zeros();
    for (int y = 0; y < out.height; ++y)
      for (int xx = 0; xx < out.width; ++xx) {
        const double sx = ox + (xx + 0.5) * scale - 0.5;
        const double sy = oy + (y + 0.5) * scale - 0.5;
        for (int c = 0; c < out.channels; ++c)
          cropped.at(y, xx, c) = static_cast<float>(detail::bilinear(out, sy, sx, c));
      }
    out = std::move(cropped);
  }

  for (auto& v : out.data) v = clamp01(v);
  return out;
}

}  // namespace gameclr
