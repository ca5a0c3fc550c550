#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "gameclr/image.hpp"
#include "gameclr/rng.hpp"
#include "gameclr/scene.hpp"

namespace gameclr {

// ---------------------------------------------------------------------------
// Screen geometry. Every pixel-space constant of the renderer lives here;
// the road-region mask below is derived from the same numbers.
// ---------------------------------------------------------------------------
inline constexpr double kHorizonY = 24.0;
inline constexpr double kRoadCenterX = 32.0;
inline constexpr double kDepthScale = 180.0;         // y offset below horizon = this / distance
inline constexpr double kVehicleWidthScale = 180.0;  // on-screen width = this / distance
inline constexpr double kVehicleHeightScale = 140.0;
inline constexpr double kLaneBase = 6.0;             // lane center offset = base + scale / distance
inline constexpr double kLaneScale = 90.0;
inline constexpr double kRoadHalfBase = 14.0;        // road half width = base + scale / distance
inline constexpr double kRoadHalfScale = 90.0;
inline constexpr double kSeparatorBase = 3.0;
inline constexpr double kSeparatorScale = 45.0;
// Heading is shown as a horizontal shift of sin(direction) * distance * this.
// 0.45 px/m keeps the shift visible across the whole distance range at 64x64.
inline constexpr double kDirectionSkew = 0.45;

inline constexpr int kHoodTop = 58;
inline constexpr int kHoodLeft = 16;
inline constexpr int kHoodRight = 48;  // exclusive

struct Rgb {
  double r, g, b;
};

inline constexpr std::array<Rgb, kNumVehicleColors> kVehiclePalette = {{
    {0.82, 0.10, 0.10},  // red
    {0.12, 0.25, 0.80},  // blue
    {0.10, 0.55, 0.20},  // green
    {0.90, 0.78, 0.12},  // yellow
    {0.92, 0.92, 0.92},  // white
}};

namespace detail {

struct SkyColors {
  Rgb top, bottom;
};

inline SkyColors sky_colors(TimeOfDay t) {
  switch (t) {
    case TimeOfDay::noon: return {{0.40, 0.60, 0.95}, {0.80, 0.88, 0.98}};
    case TimeOfDay::sunset: return {{0.30, 0.18, 0.45}, {0.98, 0.60, 0.30}};
    case TimeOfDay::midnight: return {{0.03, 0.03, 0.10}, {0.10, 0.10, 0.22}};
  }
  return {{0, 0, 0}, {0, 0, 0}};
}

inline void blend_pixel(Image& im, int y, int x, const Rgb& c, double cov) {
  if (cov <= 0.0) return;
  float* p = &im.at(y, x, 0);
  p[0] = static_cast<float>(p[0] * (1.0 - cov) + c.r * cov);
  p[1] = static_cast<float>(p[1] * (1.0 - cov) + c.g * cov);
  p[2] = static_cast<float>(p[2] * (1.0 - cov) + c.b * cov);
}

// Axis-aligned rectangle with fractional edge coverage. Sub-pixel positions
// matter here: the heading shift can be well under one pixel at short range.
inline void fill_rect(Image& im, double x0, double x1, double y0, double y1, const Rgb& c,
                      double alpha = 1.0) {
  const int iy0 = std::max(0, static_cast<int>(std::floor(y0)));
  const int iy1 = std::min(im.height - 1, static_cast<int>(std::ceil(y1)) - 1);
  const int ix0 = std::max(0, static_cast<int>(std::floor(x0)));
  const int ix1 = std::min(im.width - 1, static_cast<int>(std::ceil(x1)) - 1);
  for (int iy = iy0; iy <= iy1; ++iy) {
    const double cy = std::clamp(std::min<double>(iy + 1.0, y1) - std::max<double>(iy, y0), 0.0, 1.0);
    if (cy <= 0.0) continue;
    for (int ix = ix0; ix <= ix1; ++ix) {
      const double cx =
          std::clamp(std::min<double>(ix + 1.0, x1) - std::max<double>(ix, x0), 0.0, 1.0);
      blend_pixel(im, iy, ix, c, cy * cx * alpha);
    }
  }
}

inline void fill_disc(Image& im, double cx, double cy, double radius, const Rgb& c) {
  const int iy0 = std::max(0, static_cast<int>(std::floor(cy - radius - 1)));
  const int iy1 = std::min(im.height - 1, static_cast<int>(std::ceil(cy + radius + 1)));
  const int ix0 = std::max(0, static_cast<int>(std::floor(cx - radius - 1)));
  const int ix1 = std::min(im.width - 1, static_cast<int>(std::ceil(cx + radius + 1)));
  for (int iy = iy0; iy <= iy1; ++iy) {
    for (int ix = ix0; ix <= ix1; ++ix) {
      const double d = std::hypot(ix + 0.5 - cx, iy + 0.5 - cy);
      blend_pixel(im, iy, ix, c, std::clamp(radius + 0.5 - d, 0.0, 1.0));
    }
  }
}

inline std::uint64_t pixel_hash(int x, int y, std::uint64_t salt) {
  return splitmix_finalize((static_cast<std::uint64_t>(x) * 0x9e3779b97f4a7c15ULL +
                            static_cast<std::uint64_t>(y) * 0xc2b2ae3d27d4eb4fULL) ^
                           salt);
}

inline void scale_brightness(Image& im, double factor) {
  for (auto& v : im.data) v = static_cast<float>(v * factor);
}

// Final color grade over every painted surface. The factors shift hue, not
// just brightness, so no pixel-space augmentation can reproduce a change of
// time or weather; only re-rendering under different conditions can.
inline Rgb illumination(TimeOfDay t, Weather w) {
  Rgb g{1.0, 1.0, 1.0};
  switch (t) {
    case TimeOfDay::noon: break;
    case TimeOfDay::sunset: g = {1.06, 0.88, 0.78}; break;
    case TimeOfDay::midnight: g = {0.42, 0.48, 0.70}; break;
  }
  switch (w) {
    case Weather::clear: break;
    case Weather::cloudy: g = {g.r * 0.78, g.g * 0.80, g.b * 0.84}; break;
    case Weather::windy: g = {g.r * 0.94, g.g * 0.95, g.b * 0.96}; break;
    case Weather::wet: g = {g.r * 0.88, g.g * 0.92, g.b * 1.00}; break;
    case Weather::rainy: g = {g.r * 0.72, g.g * 0.78, g.b * 0.90}; break;
  }
  return g;
}

// Weather is painted right after the sky pass: brightness shifts for
// cloudy/windy, hash-positioned glints for wet, hash-positioned diagonal
// streaks for rain. Everything is a pure function of pixel coordinates.
inline void apply_weather(Image& im, Weather w) {
  switch (w) {
    case Weather::clear:
      break;
    case Weather::cloudy:
      scale_brightness(im, 0.75);
      break;
    case Weather::windy:
      scale_brightness(im, 0.90);
      break;
    case Weather::wet: {
      scale_brightness(im, 0.95);
      const Rgb glint{0.95, 0.97, 1.0};
      for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x)
          if (pixel_hash(x, y, 0x77e7u) % 31 == 0) blend_pixel(im, y, x, glint, 0.5);
      break;
    }
    case Weather::rainy: {
      scale_brightness(im, 0.85);
      const Rgb streak{0.72, 0.76, 0.85};
      // 48 streaks, four pixels long, leaning one column per two rows.
      for (int k = 0; k < 48; ++k) {
        const int x0 = static_cast<int>(pixel_hash(k, 0, 0x5a17u) % 64);
        const int y0 = static_cast<int>(pixel_hash(k, 1, 0x5a17u) % 60);
        for (int t = 0; t < 4; ++t) {
          const int y = y0 + t;
          const int x = x0 + t / 2;
          if (y < im.height && x < im.width) blend_pixel(im, y, x, streak, 0.55);
        }
      }
      break;
    }
  }
}

}  // namespace detail

// Continuous screen-space bounds of a vehicle rectangle. Shared between the
// renderer and the road-region mask so the two can never disagree.
struct VehicleRect {
  double x0, x1, y0, y1;
};

inline VehicleRect vehicle_screen_rect(int lane, double distance, double direction) {
  const double y_base = kHorizonY + kDepthScale / distance;
  const double w = kVehicleWidthScale / distance;
  const double h = kVehicleHeightScale / distance;
  const double lane_sign = static_cast<double>(lane - 1);
  const double xc = kRoadCenterX + lane_sign * (kLaneBase + kLaneScale / distance) +
                    std::sin(direction) * distance * kDirectionSkew;
  return {xc - w / 2.0, xc + w / 2.0, y_base - h, y_base};
}

// Renders a scene to pixels. Pure: equal states give bit-identical images.
inline Image render(const SceneState& s) {
  Image im = Image::zeros();

  // Sky: vertical gradient over the full frame plus a celestial disc on the
  // left side (keeps the frame mirror-asymmetric).
  const auto sky = detail::sky_colors(s.time_of_day);
  for (int y = 0; y < im.height; ++y) {
    const double t = static_cast<double>(y) / (im.height - 1);
    const Rgb c{sky.top.r + (sky.bottom.r - sky.top.r) * t,
                sky.top.g + (sky.bottom.g - sky.top.g) * t,
                sky.top.b + (sky.bottom.b - sky.top.b) * t};
    for (int x = 0; x < im.width; ++x) {
      im.at(y, x, 0) = static_cast<float>(c.r);
      im.at(y, x, 1) = static_cast<float>(c.g);
      im.at(y, x, 2) = static_cast<float>(c.b);
    }
  }
  switch (s.time_of_day) {
    case TimeOfDay::noon: detail::fill_disc(im, 12.5, 8.5, 4.5, {1.0, 0.95, 0.70}); break;
    case TimeOfDay::sunset: detail::fill_disc(im, 11.5, 18.5, 5.5, {1.0, 0.62, 0.28}); break;
    case TimeOfDay::midnight: detail::fill_disc(im, 12.5, 8.5, 3.5, {0.85, 0.87, 0.92}); break;
  }

  detail::apply_weather(im, s.weather);

  // Ground strip below the horizon: grass shoulder left, sand shoulder right,
  // per-lane asphalt tints, and two dashed separators (warm left, cool right),
  // scanline by scanline. The left/right asymmetries are deliberate: global
  // average pooling in the encoder washes out absolute position, so lane
  // identity and heading stay readable only through what a vehicle occludes.
  const Rgb grass{0.15, 0.34, 0.17};
  const Rgb sand{0.46, 0.39, 0.25};
  const Rgb lane_left{0.21, 0.23, 0.30};
  const Rgb lane_mid{0.24, 0.24, 0.26};
  const Rgb lane_right{0.29, 0.25, 0.21};
  const Rgb sep_left{0.95, 0.80, 0.15};
  const Rgb sep_right{0.92, 0.92, 0.90};
  for (int y = static_cast<int>(kHorizonY); y < im.height; ++y) {
    const double depth = kDepthScale / (y + 0.5 - kHorizonY);
    const double half = kRoadHalfBase + kRoadHalfScale / depth;
    const double sep = kSeparatorBase + kSeparatorScale / depth;
    const bool dash_on = depth <= 60.0 && std::fmod(depth, 4.0) < 2.2;
    for (int x = 0; x < im.width; ++x) {
      const double dx = x + 0.5 - kRoadCenterX;
      Rgb c;
      if (dx < -half) {
        c = grass;
      } else if (dx > half) {
        c = sand;
      } else if (dash_on && std::abs(dx + sep) <= 1.25) {
        c = sep_left;
      } else if (dash_on && std::abs(dx - sep) <= 1.25) {
        c = sep_right;
      } else if (dx < -sep) {
        c = lane_left;
      } else if (dx > sep) {
        c = lane_right;
      } else {
        c = lane_mid;
      }
      im.at(y, x, 0) = static_cast<float>(c.r);
      im.at(y, x, 1) = static_cast<float>(c.g);
      im.at(y, x, 2) = static_cast<float>(c.b);
    }
  }

  // Traffic, far to near so closer vehicles occlude.
  std::array<int, kNumLanes> order = {0, 1, 2};
  std::sort(order.begin(), order.end(), [&s](int a, int b) {
    const double da = s.lanes[a] ? s.lanes[a]->distance : -1.0;
    const double db = s.lanes[b] ? s.lanes[b]->distance : -1.0;
    if (da != db) return da > db;
    return a < b;
  });
  for (int lane : order) {
    if (!s.lanes[lane]) continue;
    const TrafficVehicle& v = *s.lanes[lane];
    const VehicleRect r = vehicle_screen_rect(lane, v.distance, v.direction);
    const Rgb body = kVehiclePalette[static_cast<std::size_t>(v.color)];
    detail::fill_rect(im, r.x0, r.x1, r.y0, r.y1, body);
    // windshield band in the upper third
    const double band_h = (r.y1 - r.y0) / 3.0;
    detail::fill_rect(im, r.x0 + (r.x1 - r.x0) * 0.15, r.x1 - (r.x1 - r.x0) * 0.15, r.y0 + band_h * 0.4,
                      r.y0 + band_h * 1.2, {body.r * 0.35, body.g * 0.35, body.b * 0.45});
  }

  // Ego hood, fixed at bottom center.
  const Rgb ego = kVehiclePalette[static_cast<std::size_t>(s.ego_color)];
  const Rgb hood{ego.r * 0.80, ego.g * 0.80, ego.b * 0.80};
  for (int y = kHoodTop; y < im.height; ++y)
    for (int x = kHoodLeft; x < kHoodRight; ++x) {
      im.at(y, x, 0) = static_cast<float>(hood.r);
      im.at(y, x, 1) = static_cast<float>(hood.g);
      im.at(y, x, 2) = static_cast<float>(hood.b);
    }

  const Rgb grade = detail::illumination(s.time_of_day, s.weather);
  for (int y = 0; y < im.height; ++y)
    for (int x = 0; x < im.width; ++x) {
      im.at(y, x, 0) = static_cast<float>(im.at(y, x, 0) * grade.r);
      im.at(y, x, 1) = static_cast<float>(im.at(y, x, 1) * grade.g);
      im.at(y, x, 2) = static_cast<float>(im.at(y, x, 2) * grade.b);
    }

  for (auto& v : im.data) v = clamp01(v);
  return im;
}

// 64x64 mask (1 = inside) of every pixel the road or any reachable traffic
// vehicle can touch. Scenes that differ only in traffic differ only inside
// this mask.
inline const std::vector<std::uint8_t>& road_region_mask() {
  static const std::vector<std::uint8_t> mask = [] {
    std::vector<std::uint8_t> m(static_cast<std::size_t>(kImageSize) * kImageSize, 0);
    const auto mark = [&m](int y, int x) {
      if (y >= 0 && y < kImageSize && x >= 0 && x < kImageSize)
        m[static_cast<std::size_t>(y) * kImageSize + x] = 1;
    };
    for (int y = static_cast<int>(kHorizonY); y < kImageSize; ++y) {
      const double depth = kDepthScale / (y + 0.5 - kHorizonY);
      const double half = kRoadHalfBase + kRoadHalfScale / depth;
      for (int x = 0; x < kImageSize; ++x)
        if (std::abs(x + 0.5 - kRoadCenterX) <= half) mark(y, x);
    }
    for (int lane = 0; lane < kNumLanes; ++lane) {
      for (double d = kDistanceMin; d <= kDistanceMax + 1e-9; d += 0.05) {
        const VehicleRect lo = vehicle_screen_rect(lane, d, -kDirectionMax);
        const VehicleRect hi = vehicle_screen_rect(lane, d, kDirectionMax);
        const int x0 = static_cast<int>(std::floor(std::min(lo.x0, hi.x0))) - 1;
        const int x1 = static_cast<int>(std::ceil(std::max(lo.x1, hi.x1))) + 1;
        const int y0 = static_cast<int>(std::floor(lo.y0)) - 1;
        const int y1 = static_cast<int>(std::ceil(lo.y1)) + 1;
        for (int y = y0; y <= y1; ++y)
          for (int x = x0; x <= x1; ++x) mark(y, x);
      }
    }
    return m;
  }();
  return mask;
}

}  // namespace gameclr
