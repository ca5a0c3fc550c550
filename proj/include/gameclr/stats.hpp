#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "gameclr/errors.hpp"

namespace gameclr {

inline double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) throw ShapeMismatch("mean of empty sample");
  double s = 0.0;
  for (double v : xs) s += v;
  return s / static_cast<double>(xs.size());
}

inline double sample_variance(const std::vector<double>& xs) {
  if (xs.size() < 2) throw ShapeMismatch("variance needs at least 2 samples");
  const double m = mean_of(xs);
  double s = 0.0;
  for (double v : xs) s += (v - m) * (v - m);
  return s / static_cast<double>(xs.size() - 1);
}

namespace detail {

// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
inline double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-14;
  constexpr double kFpMin = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace detail

inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::betacf(a, b, x) / a;
  return 1.0 - front * detail::betacf(b, a, 1.0 - x) / b;
}

// Two-sided tail probability of Student's t with nu degrees of freedom.
inline double t_two_sided_p(double t, double nu) {
  if (!(nu > 0.0)) throw ConfigError("degrees of freedom must be > 0");
  const double x = nu / (nu + t * t);
  return incomplete_beta(nu / 2.0, 0.5, x);
}

// Upper 97.5% quantile of Student's t, by bisection on the tail probability.
inline double t_quantile_975(double nu) {
  double lo = 0.0, hi = 1e3;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (t_two_sided_p(mid, nu) > 0.05) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

struct MeanCi {
  double mean = 0.0;
  double half_width = 0.0;
};

// Mean with 95% confidence half-width via Student t on n-1 dof. A single
// sample has no spread estimate; its half-width is the 0 placeholder.
inline MeanCi mean_ci95(const std::vector<double>& xs) {
  MeanCi out;
  out.mean = mean_of(xs);
  if (xs.size() < 2) return out;
  const double n = static_cast<double>(xs.size());
  const double sd = std::sqrt(sample_variance(xs));
  out.half_width = t_quantile_975(n - 1.0) * sd / std::sqrt(n);
  return out;
}

// Welch's unequal-variance t-test, two-sided p. Degenerate zero-variance
// samples compare means directly: equal means give p=1, different give p=0.
inline double welch_p_value(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() < 2 || ys.size() < 2) throw ShapeMismatch("welch test needs >= 2 samples each");
  const double m1 = mean_of(xs), m2 = mean_of(ys);
  const double v1 = sample_variance(xs), v2 = sample_variance(ys);
  const double n1 = static_cast<double>(xs.size()), n2 = static_cast<double>(ys.size());
  const double se2 = v1 / n1 + v2 / n2;
  if (se2 == 0.0) return m1 == m2 ? 1.0 : 0.0;
  const double t = (m1 - m2) / std::sqrt(se2);
  const double nu = se2 * se2 / ((v1 / n1) * (v1 / n1) / (n1 - 1.0) +
                                 (v2 / n2) * (v2 / n2) / (n2 - 1.0));
  return t_two_sided_p(t, nu);
}

}  // namespace gameclr
