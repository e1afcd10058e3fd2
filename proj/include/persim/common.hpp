#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace persim {

// Core scalar type. 64-bit by default; -DPERSIM_SINGLE_PRECISION switches the
// whole numeric core to 32-bit (the test tolerances assume the default build).
#ifdef PERSIM_SINGLE_PRECISION
using real = float;
#else
using real = double;
#endif

using Vec = std::vector<real>;

// Dense row-major matrix. The only shape the project needs; rows are
// contiguous so row(i) is a cheap span.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<real> data;

  Matrix() = default;
  Matrix(int r, int c, real fill = 0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {}

  real& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  const real& operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  std::span<real> row(int r) {
    return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
  }
  std::span<const real> row(int r) const {
    return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
  }

  bool same_shape(const Matrix& other) const { return rows == other.rows && cols == other.cols; }
};

inline real dot(std::span<const real> a, std::span<const real> b) {
  real acc = 0;
  for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline real squared_distance(std::span<const real> a, std::span<const real> b) {
  real acc = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const real d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

inline real euclidean_norm(std::span<const real> a) { return std::sqrt(dot(a, a)); }

inline bool all_finite(std::span<const real> a) {
  for (real v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace persim
