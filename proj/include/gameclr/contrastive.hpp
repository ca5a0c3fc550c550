#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "gameclr/errors.hpp"
#include "gameclr/matrix.hpp"

namespace gameclr {

struct LossConfig {
  double temperature = 0.2;
  int k_p = 2;
  int k_n = 2;
  int batch_size = 64;
};

inline void require_valid_loss_config(const LossConfig& c, bool gameclr) {
  if (!(c.temperature > 0.0)) throw NonPositiveTemperature();
  if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (gameclr && (c.k_p < 1 || c.k_n < 1))
    throw ConfigError("k_p and k_n must be >= 1 for gameclr");
}

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw EmptyEmbedding();
  if (a.size() != b.size()) throw ShapeMismatch("embedding dims differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

// P(a, p) = exp(a.p/tau) / (exp(a.p/tau) + sum_n exp(a.n/tau)).
// Max-subtraction keeps this stable for |similarity|/tau up to hundreds.
inline double contrastive_probability(const std::vector<double>& a, const std::vector<double>& p,
                                      const std::vector<std::vector<double>>& negatives,
                                      double tau) {
  if (!(tau > 0.0)) throw NonPositiveTemperature();
  const double sp = detail::dot(a, p) / tau;
  double m = sp;
  std::vector<double> sn(negatives.size());
  for (std::size_t i = 0; i < negatives.size(); ++i) {
    sn[i] = detail::dot(a, negatives[i]) / tau;
    m = std::max(m, sn[i]);
  }
  double denom = std::exp(sp - m);
  const double num = denom;
  for (double s : sn) denom += std::exp(s - m);
  return num / denom;
}

// L(a, P, N) = -sum_{p in P} log P(a, p). N may be empty; P may not.
inline double contrastive_loss(const std::vector<double>& a,
                               const std::vector<std::vector<double>>& positives,
                               const std::vector<std::vector<double>>& negatives, double tau) {
  if (positives.empty()) throw EmptyPositiveSet();
  if (!(tau > 0.0)) throw NonPositiveTemperature();
  double loss = 0.0;
  for (const auto& p : positives) loss -= std::log(contrastive_probability(a, p, negatives, tau));
  return loss;
}

// ---------------------------------------------------------------------------
// Batch-level loss over an embedding matrix, with analytic gradients.
// The per-anchor index sets say which rows act as anchor / positives /
// negatives; `normalizer` divides the summed loss (2B for SimCLR's view
// averaging, B for GameCLR's anchor averaging).
// ---------------------------------------------------------------------------
struct AnchorTerms {
  int anchor = -1;
  std::vector<int> positives;
  std::vector<int> negatives;
};

struct BatchLossTerms {
  std::vector<AnchorTerms> anchors;
  double normalizer = 1.0;
};

// Computes the averaged batch loss; when `grad` is non-null it is resized to
// the embedding shape and filled with d(loss)/d(embedding), all in doubles.
// This is the training path; contrastive_loss above doubles as an independent
// per-anchor recomputation in tests.
template <typename T>
inline double batch_loss_and_grad(const Matrix<T>& emb, const BatchLossTerms& terms, double tau,
                                  Matrix<double>* grad = nullptr) {
  if (!(tau > 0.0)) throw NonPositiveTemperature();
  if (grad != nullptr) *grad = Matrix<double>(emb.rows, emb.cols);
  const int d = emb.cols;
  const auto row_dot = [&](int i, int j) {
    const T* a = emb.row(i);
    const T* b = emb.row(j);
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += static_cast<double>(a[k]) * static_cast<double>(b[k]);
    return s;
  };
  double total = 0.0;
  std::vector<double> sp, sn, en, dsp;
  for (const AnchorTerms& t : terms.anchors) {
    if (t.positives.empty()) throw EmptyPositiveSet();
    if (t.anchor < 0 || t.anchor >= emb.rows) throw IndexOutOfRange("anchor row");
    sp.assign(t.positives.size(), 0.0);
    sn.assign(t.negatives.size(), 0.0);
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < t.positives.size(); ++i) {
      sp[i] = row_dot(t.anchor, t.positives[i]) / tau;
      m = std::max(m, sp[i]);
    }
    for (std::size_t i = 0; i < t.negatives.size(); ++i) {
      sn[i] = row_dot(t.anchor, t.negatives[i]) / tau;
      m = std::max(m, sn[i]);
    }
    en.assign(sn.size(), 0.0);
    double neg_sum = 0.0;
    for (std::size_t i = 0; i < sn.size(); ++i) {
      en[i] = std::exp(sn[i] - m);
      neg_sum += en[i];
    }
    // dsp[i] = dL/d(sp_i); dsn accumulated below as sum over positive terms.
    dsp.assign(sp.size(), 0.0);
    std::vector<double> dsn(sn.size(), 0.0);
    for (std::size_t i = 0; i < sp.size(); ++i) {
      const double ep = std::exp(sp[i] - m);
      const double denom = ep + neg_sum;
      total += std::log(denom) + m - sp[i];  // log D_p - s_p
      if (grad != nullptr) {
        dsp[i] = ep / denom - 1.0;
        for (std::size_t j = 0; j < sn.size(); ++j) dsn[j] += en[j] / denom;
      }
    }
    if (grad != nullptr) {
      const auto add_scaled = [&](int row, int other, double w) {
        double* g = grad->row(row);
        const T* o = emb.row(other);
        for (int k = 0; k < d; ++k) g[k] += w * static_cast<double>(o[k]);
      };
      for (std::size_t i = 0; i < t.positives.size(); ++i) {
        add_scaled(t.anchor, t.positives[i], dsp[i] / tau);
        add_scaled(t.positives[i], t.anchor, dsp[i] / tau);
      }
      for (std::size_t j = 0; j < t.negatives.size(); ++j) {
        add_scaled(t.anchor, t.negatives[j], dsn[j] / tau);
        add_scaled(t.negatives[j], t.anchor, dsn[j] / tau);
      }
    }
  }
  const double scale = 1.0 / terms.normalizer;
  if (grad != nullptr)
    for (double& g : grad->data) g *= scale;
  return total * scale;
}

}  // namespace gameclr
