#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "gameclr/errors.hpp"
#include "gameclr/matrix.hpp"

namespace gameclr {

struct RidgeFit {
  std::vector<double> weights;
  double intercept = 0.0;
};

// Shared factorization for fitting many targets against one design matrix:
// centers X, forms X_c^T X_c + lambda I once, and Cholesky-factors it.
class RidgeSolver {
 public:
  RidgeSolver(const Matrix<double>& x, double lambda) : d_(x.cols), n_(x.rows), lambda_(lambda) {
    if (n_ < 2) throw ShapeMismatch("ridge needs at least 2 rows");
    if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
    col_mean_.assign(static_cast<std::size_t>(d_), 0.0);
    for (int r = 0; r < n_; ++r) {
      const double* row = x.row(r);
      for (int c = 0; c < d_; ++c) col_mean_[c] += row[c];
    }
    for (double& m : col_mean_) m /= n_;

    xc_ = x;
    for (int r = 0; r < n_; ++r) {
      double* row = xc_.row(r);
      for (int c = 0; c < d_; ++c) row[c] -= col_mean_[c];
    }

    // lower triangle of A = Xc^T Xc + lambda I
    chol_.assign(static_cast<std::size_t>(d_) * d_, 0.0);
    for (int i = 0; i < d_; ++i)
      for (int j = 0; j <= i; ++j) {
        double s = 0.0;
        for (int r = 0; r < n_; ++r) s += xc_.at(r, i) * xc_.at(r, j);
        if (i == j) s += lambda;
        chol_[static_cast<std::size_t>(i) * d_ + j] = s;
      }
    cholesky_factor();
  }

  int dim() const { return d_; }
  int rows() const { return n_; }
  const std::vector<double>& column_means() const { return col_mean_; }

  RidgeFit solve(const std::vector<double>& y) const {
    if (static_cast<int>(y.size()) != n_) throw ShapeMismatch("ridge target length");
    double y_mean = 0.0;
    for (double v : y) y_mean += v;
    y_mean /= n_;

    std::vector<double> b(static_cast<std::size_t>(d_), 0.0);
    for (int r = 0; r < n_; ++r) {
      const double yc = y[r] - y_mean;
      const double* row = xc_.row(r);
      for (int c = 0; c < d_; ++c) b[c] += row[c] * yc;
    }
    // L L^T w = b
    for (int i = 0; i < d_; ++i) {
      double s = b[i];
      for (int j = 0; j < i; ++j) s -= chol_[static_cast<std::size_t>(i) * d_ + j] * b[j];
      b[i] = s / chol_[static_cast<std::size_t>(i) * d_ + i];
    }
    for (int i = d_ - 1; i >= 0; --i) {
      double s = b[i];
      for (int j = i + 1; j < d_; ++j) s -= chol_[static_cast<std::size_t>(j) * d_ + i] * b[j];
      b[i] = s / chol_[static_cast<std::size_t>(i) * d_ + i];
    }

    RidgeFit fit;
    fit.weights = std::move(b);
    fit.intercept = y_mean;
    for (int c = 0; c < d_; ++c) fit.intercept -= col_mean_[c] * fit.weights[c];
    return fit;
  }

  double predict(const RidgeFit& fit, const double* row) const {
    double v = fit.intercept;
    for (int c = 0; c < d_; ++c) v += fit.weights[c] * row[c];
    return v;
  }

 private:
  void cholesky_factor() {
    for (int i = 0; i < d_; ++i) {
      for (int j = 0; j <= i; ++j) {
        double s = chol_[static_cast<std::size_t>(i) * d_ + j];
        for (int k = 0; k < j; ++k)
          s -= chol_[static_cast<std::size_t>(i) * d_ + k] *
               chol_[static_cast<std::size_t>(j) * d_ + k];
        if (i == j) {
          if (s <= 0.0) {
            if (lambda_ == 0.0) throw SingularSystem();
            throw NumericalError("ridge normal equations lost positive definiteness");
          }
          chol_[static_cast<std::size_t>(i) * d_ + j] = std::sqrt(s);
        } else {
          chol_[static_cast<std::size_t>(i) * d_ + j] =
              s / chol_[static_cast<std::size_t>(j) * d_ + j];
        }
      }
    }
  }

  int d_;
  int n_;
  double lambda_;
  std::vector<double> col_mean_;
  Matrix<double> xc_;
  std::vector<double> chol_;
};

inline RidgeFit fit_ridge(const Matrix<double>& x, const std::vector<double>& y, double lambda) {
  return RidgeSolver(x, lambda).solve(y);
}

inline double r_squared(const std::vector<double>& y_true, const std::vector<double>& y_pred) {
  if (y_true.size() != y_pred.size()) throw ShapeMismatch("r_squared length mismatch");
  if (y_true.size() < 2) throw ShapeMismatch("r_squared needs at least 2 points");
  double mean = 0.0;
  for (double v : y_true) mean += v;
  mean /= static_cast<double>(y_true.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    ss_tot += (y_true[i] - mean) * (y_true[i] - mean);
  }
  if (ss_tot == 0.0) throw ConstantTarget();
  return 1.0 - ss_res / ss_tot;
}

}  // namespace gameclr
