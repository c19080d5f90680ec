#pragma once

// Dense row-major matrix of doubles. Vectors are 1xN or Nx1. All model
// arithmetic runs in 64-bit so finite-difference checks are meaningful;
// checkpoints downcast to f32 on disk.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "vqg/common.hpp"

namespace vqg {

struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> d;

  Tensor() = default;
  Tensor(int r, int c, double fill = 0.0)
      : rows(r), cols(c), d(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

  static Tensor row(const std::vector<double>& v) {
    Tensor t(1, static_cast<int>(v.size()));
    t.d = v;
    return t;
  }

  int size() const { return rows * cols; }

  double& at(int r, int c) { return d[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return d[static_cast<std::size_t>(r) * cols + c]; }

  double& operator[](std::size_t i) { return d[i]; }
  double operator[](std::size_t i) const { return d[i]; }

  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  void fill(double v) { std::fill(d.begin(), d.end(), v); }

  bool all_finite() const {
    for (double v : d)
      if (!std::isfinite(v)) return false;
    return true;
  }

  double sq_norm() const {
    double s = 0.0;
    for (double v : d) s += v * v;
    return s;
  }

  std::string shape_str() const {
    return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
  }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
}

// c = a * b, (m x k)(k x n). ikj loop order keeps the inner loop
// contiguous in both b and c.
inline Tensor matmul_values(const Tensor& a, const Tensor& b) {
  if (a.cols != b.rows)
    throw ShapeError("matmul: inner dims " + a.shape_str() + " vs " + b.shape_str());
  Tensor c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.d[static_cast<std::size_t>(i) * a.cols];
    double* crow = &c.d[static_cast<std::size_t>(i) * c.cols];
    for (int k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = &b.d[static_cast<std::size_t>(k) * b.cols];
      for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

// c += a^T * b, used by matmul backward
inline void add_at_mul(Tensor& c, const Tensor& a, const Tensor& b) {
  for (int k = 0; k < a.rows; ++k) {
    const double* arow = &a.d[static_cast<std::size_t>(k) * a.cols];
    const double* brow = &b.d[static_cast<std::size_t>(k) * b.cols];
    for (int i = 0; i < a.cols; ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      double* crow = &c.d[static_cast<std::size_t>(i) * c.cols];
      for (int j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
    }
  }
}

// c += a * b^T
inline void add_mul_bt(Tensor& c, const Tensor& a, const Tensor& b) {
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.d[static_cast<std::size_t>(i) * a.cols];
    double* crow = &c.d[static_cast<std::size_t>(i) * c.cols];
    for (int j = 0; j < b.rows; ++j) {
      const double* brow = &b.d[static_cast<std::size_t>(j) * b.cols];
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
      crow[j] += s;
    }
  }
}

}  // namespace vqg
