// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "losparse/errors.hpp"

namespace losparse {

// Dense row-major matrix of doubles, the single numeric carrier of this
// library. Plain value semantics: copying copies the buffer, there is no
// aliasing and no shared state.
class DenseMatrix {
 public:
  DenseMatrix() = default;

  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::string shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// C = A * B with a fixed summation order: for each output row the inner
// index j advances in ascending order, so results are bitwise reproducible
// run to run.
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: dimension mismatch (" + a.shape_string() +
                     " times " + b.shape_string() + ")");
  }
  DenseMatrix c(a.rows(), b.cols());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = c.data() + i * m;
    const double* arow = a.data() + i * k;
    for (std::size_t j = 0; j < k; ++j) {
      const double aij = arow[j];
      const double* brow = b.data() + j * m;
      for (std::size_t l = 0; l < m; ++l) crow[l] += aij * brow[l];
    }
  }
  return c;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline double frobenius_norm(const DenseMatrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * a.data()[i];
  return std::sqrt(s);
}

inline DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("add: dimension mismatch (" + a.shape_string() +
                     " plus " + b.shape_string() + ")");
  }
  DenseMatrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
  return c;
}

inline DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("subtract: dimension mismatch (" + a.shape_string() +
                     " minus " + b.shape_string() + ")");
  }
  DenseMatrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
  return c;
}

inline DenseMatrix scale(const DenseMatrix& a, double factor) {
  DenseMatrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] *= factor;
  return c;
}

// a -= alpha * g, the in-place SGD update primitive.
inline void axpy_inplace(DenseMatrix& a, double alpha, const DenseMatrix& g) {
  if (a.rows() != g.rows() || a.cols() != g.cols()) {
    throw ShapeError("axpy_inplace: dimension mismatch (" + a.shape_string() +
                     " vs " + g.shape_string() + ")");
  }
  for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] -= alpha * g.data()[i];
}

}  // namespace losparse
