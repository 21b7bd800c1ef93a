#pragma once

#include <cmath>
#include <cstddef>
#include <cstring>
#include <span>
#include <stdexcept>
#include <vector>

namespace silan {

// Row-major dense matrix of doubles. The one numeric carrier in the library;
// everything is desk scale, so no BLAS and no expression templates.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {values.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * cols, cols};
  }

  bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }
  bool empty() const { return values.empty(); }
};

inline bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

inline bool all_finite(const DenseMatrix& m) {
  return all_finite(std::span<const double>(m.values));
}

inline bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  return a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

inline bool bitwise_equal(const DenseMatrix& a, const DenseMatrix& b) {
  return a.same_shape(b) && bitwise_equal(std::span<const double>(a.values),
                                          std::span<const double>(b.values));
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline double l2_distance_sq(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Ties resolve to the lowest index.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

// C = A * B
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dimensions differ");
  DenseMatrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.values.data() + i * a.cols;
    double* crow = c.values.data() + i * c.cols;
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      const double* brow = b.values.data() + k * b.cols;
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

// C = A^T * B
inline DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows != b.rows) throw std::invalid_argument("matmul_at_b: row counts differ");
  DenseMatrix c(a.cols, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.values.data() + i * a.cols;
    const double* brow = b.values.data() + i * b.cols;
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      double* crow = c.values.data() + k * c.cols;
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

// C = A * B^T
inline DenseMatrix matmul_a_bt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols != b.cols) throw std::invalid_argument("matmul_a_bt: column counts differ");
  DenseMatrix c(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.rows; ++j) {
      c(i, j) = dot(a.row(i), b.row(j));
    }
  }
  return c;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  }
  return t;
}

inline std::vector<double> column_sums(const DenseMatrix& a) {
  std::vector<double> s(a.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.values.data() + i * a.cols;
    for (std::size_t j = 0; j < a.cols; ++j) s[j] += arow[j];
  }
  return s;
}

}  // namespace silan
