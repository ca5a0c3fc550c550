#pragma once

#include <cstddef>
#include <vector>

#include "gameclr/errors.hpp"

namespace gameclr {

// Dense row-major matrix, just enough for batches of vectors.
template <typename T>
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, T{}) {}

  T& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  const T& at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  T* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const T* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }

  bool operator==(const Matrix&) const = default;
};

template <typename T>
inline void require_shape(const Matrix<T>& m, int rows, int cols, const char* what) {
  if (m.rows != rows || m.cols != cols) throw ShapeMismatch(what);
}

}  // namespace gameclr
