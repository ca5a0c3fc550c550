#pragma once

#include <array>
#include <cstdint>
#include <numbers>
#include <optional>

#include "gameclr/errors.hpp"
#include "gameclr/rng.hpp"

namespace gameclr {

enum class Weather : int { clear = 0, cloudy, windy, wet, rainy };
enum class TimeOfDay : int { noon = 0, sunset, midnight };

inline constexpr int kNumWeathers = 5;
inline constexpr int kNumTimesOfDay = 3;
inline constexpr int kNumVehicleColors = 5;
inline constexpr int kNumLanes = 3;  // 0 = left, 1 = front, 2 = right

inline constexpr double kDistanceMin = 5.0;
inline constexpr double kDistanceMax = 45.0;
inline constexpr double kDistanceSentinel = 50.0;  // encodes "no vehicle"
// Vehicles added by the scene-altering augmentation spawn in a mid-distance
// band. Closer and the extra object is salient enough to separate a hard
// negative from its anchor almost immediately; farther and its footprint
// shrinks below what the encoder can resolve at all.
inline constexpr double kAddedVehicleDistanceMin = 19.0;
inline constexpr double kAddedVehicleDistanceMax = 26.0;
inline constexpr double kDirectionMax = std::numbers::pi / 4.0;

struct TrafficVehicle {
  double distance = kDistanceMin;   // meters, [5, 45]
  double direction = 0.0;           // signed heading in radians, [-pi/4, pi/4]
  int color = 0;                    // palette index, 0..4
};

// Symbolic game state: everything the renderer needs.
struct SceneState {
  int ego_color = 0;
  Weather weather = Weather::clear;
  TimeOfDay time_of_day = TimeOfDay::noon;
  std::array<std::optional<TrafficVehicle>, kNumLanes> lanes{};
};

// The six probe targets: per-lane distance and direction, sentinel for
// empty lanes.
struct TrafficVariables {
  double dist_left = kDistanceSentinel;
  double dir_left = 0.0;
  double dist_front = kDistanceSentinel;
  double dir_front = 0.0;
  double dist_right = kDistanceSentinel;
  double dir_right = 0.0;

  std::array<double, 6> as_array() const {
    return {dist_left, dir_left, dist_front, dir_front, dist_right, dir_right};
  }

  friend bool operator==(const TrafficVariables&, const TrafficVariables&) = default;
};

inline constexpr std::array<const char*, 6> kTrafficVariableNames = {
    "dist_left", "dir_left", "dist_front", "dir_front", "dist_right", "dir_right"};

inline int vehicle_count(const SceneState& s) {
  int n = 0;
  for (const auto& lane : s.lanes)
    if (lane.has_value()) ++n;
  return n;
}

inline TrafficVariables traffic_variables(const SceneState& s) {
  TrafficVariables tv;
  const auto read = [](const std::optional<TrafficVehicle>& lane, double& dist, double& dir) {
    if (lane.has_value()) {
      dist = lane->distance;
      dir = lane->direction;
    } else {
      dist = kDistanceSentinel;
      dir = 0.0;
    }
  };
  read(s.lanes[0], tv.dist_left, tv.dir_left);
  read(s.lanes[1], tv.dist_front, tv.dir_front);
  read(s.lanes[2], tv.dist_right, tv.dir_right);
  return tv;
}

namespace detail {

inline TrafficVehicle sample_vehicle(Rng& rng, double min_distance = kDistanceMin,
                                     double max_distance = kDistanceMax) {
  TrafficVehicle v;
  v.distance = rng.uniform(min_distance, max_distance);
  v.direction = rng.uniform(-kDirectionMax, kDirectionMax);
  v.color = rng.uniform_int(kNumVehicleColors);
  return v;
}

// Replaces an enum value with a uniformly chosen *different* value in [0, n).
inline int resample_enum(Rng& rng, int current, int n) {
  return (current + 1 + rng.uniform_int(n - 1)) % n;
}

// Changes a non-empty random subset of {weather, time_of_day, ego_color};
// each changed field is guaranteed to differ from its input value.
inline void mutate_preserving_fields(SceneState& s, Rng& rng) {
  const int mask = 1 + rng.uniform_int(7);
  if (mask & 1)
    s.weather = static_cast<Weather>(resample_enum(rng, static_cast<int>(s.weather), kNumWeathers));
  if (mask & 2)
    s.time_of_day =
        static_cast<TimeOfDay>(resample_enum(rng, static_cast<int>(s.time_of_day), kNumTimesOfDay));
  if (mask & 4) s.ego_color = resample_enum(rng, s.ego_color, kNumVehicleColors);
}

}  // namespace detail

// Samples a scene uniformly: enums uniform, vehicle count uniform in
// [0, max_vehicles], occupied lanes chosen without replacement.
inline SceneState sample_scene(std::uint64_t seed, int max_vehicles) {
  Rng rng(seed);
  SceneState s;
  s.ego_color = rng.uniform_int(kNumVehicleColors);
  s.weather = static_cast<Weather>(rng.uniform_int(kNumWeathers));
  s.time_of_day = static_cast<TimeOfDay>(rng.uniform_int(kNumTimesOfDay));

  const int count = rng.uniform_int(max_vehicles + 1);
  std::array<int, kNumLanes> order = {0, 1, 2};
  for (int i = 0; i < count; ++i) {
    const int j = i + rng.uniform_int(kNumLanes - i);
    std::swap(order[i], order[j]);
    s.lanes[order[i]] = detail::sample_vehicle(rng);
  }
  return s;
}

// Scene-preserving augmentation: nuisance fields change, traffic does not.
inline SceneState scene_preserving_augment(const SceneState& s, std::uint64_t seed) {
  Rng rng(seed);
  SceneState out = s;
  detail::mutate_preserving_fields(out, rng);
  return out;
}

// Scene-altering augmentation: nuisance fields may change and 1..k vehicles
// are added to previously empty lanes, so the vehicle count strictly grows.
inline SceneState scene_altering_augment(const SceneState& s, std::uint64_t seed) {
  std::array<int, kNumLanes> empty{};
  int k = 0;
  for (int lane = 0; lane < kNumLanes; ++lane)
    if (!s.lanes[lane].has_value()) empty[k++] = lane;
  if (k == 0) throw AllLanesOccupied();

  Rng rng(seed);
  SceneState out = s;
  // Half of the altered scenes keep the anchor's nuisance fields, so the
  // added traffic is their only difference; the rest change nuisance too.
  if (rng.bernoulli(0.5)) detail::mutate_preserving_fields(out, rng);

  const int add = 1 + rng.uniform_int(k);
  for (int i = 0; i < add; ++i) {
    const int j = i + rng.uniform_int(k - i);
    std::swap(empty[i], empty[j]);
    out.lanes[empty[i]] =
        detail::sample_vehicle(rng, kAddedVehicleDistanceMin, kAddedVehicleDistanceMax);
  }
  return out;
}

}  // namespace gameclr
