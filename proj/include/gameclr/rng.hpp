#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace gameclr {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

inline constexpr std::uint64_t splitmix_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

// splitmix64: expands a single 64-bit seed into a stream of well-mixed words.
// Used only for seeding and for deriving per-item sub-seeds.
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

  constexpr std::uint64_t next() {
    state_ += detail::kGolden;
    return detail::splitmix_finalize(state_);
  }

 private:
  std::uint64_t state_;
};

// Derives an independent stream seed for a keyed sub-task, so per-item
// results do not depend on evaluation order.
inline constexpr std::uint64_t fold_seed(std::uint64_t seed, std::uint64_t key) {
  return detail::splitmix_finalize(detail::splitmix_finalize(seed + detail::kGolden) + key);
}

// xoshiro256**: the draw generator. State seeded via splitmix64.
class Xoshiro256ss {
 public:
  explicit Xoshiro256ss(std::uint64_t seed) {
    SplitMix64 sm(seed);
    for (auto& w : state_) w = sm.next();
  }

  std::uint64_t next() {
    const std::uint64_t result = detail::rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

 private:
  std::array<std::uint64_t, 4> state_{};
};

// Draw helpers on top of xoshiro256**. One Rng per logical item; never share
// an instance across concurrent workers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_.next(); }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(gen_.next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

  // Uniform integer in [0, n). n must be >= 1.
  int uniform_int(int n) {
    const auto wide = static_cast<unsigned __int128>(gen_.next());
    return static_cast<int>((wide * static_cast<unsigned __int128>(n)) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller; two uniform draws per call, no cached
  // spare, so the draw count per call is fixed.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

 private:
  Xoshiro256ss gen_;
};

}  // namespace gameclr
