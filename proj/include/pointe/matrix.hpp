#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "pointe/error.hpp"

namespace pointe {

// Dense row-major matrix of doubles. The single numeric container used
// throughout; row vectors are 1xN matrices.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {
    if (r < 0 || c < 0) throw Error(ErrorCode::ShapeMismatch, "negative matrix dimension");
  }

  static Matrix zeros(int r, int c) { return Matrix(r, c, 0.0); }
  static Matrix filled(int r, int c, double v) { return Matrix(r, c, v); }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }

  static Matrix row3(double x, double y, double z) {
    Matrix m(1, 3);
    m.data = {x, y, z};
    return m;
  }

  static Matrix from_nested(std::initializer_list<std::initializer_list<double>> init) {
    Matrix m(static_cast<int>(init.size()),
             init.size() ? static_cast<int>(init.begin()->size()) : 0);
    int r = 0;
    for (const auto& row : init) {
      if (static_cast<int>(row.size()) != m.cols)
        throw Error(ErrorCode::ShapeMismatch, "ragged initializer");
      int c = 0;
      for (double v : row) m.at(r, c++) = v;
      ++r;
    }
    return m;
  }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  double* row_ptr(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const double* row_ptr(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  int count() const { return rows * cols; }
  bool empty() const { return data.empty(); }

  std::string shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
  }
};

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (!a.same_shape(b))
    throw Error(ErrorCode::ShapeMismatch,
                std::string(what) + ": " + a.shape_str() + " vs " + b.shape_str());
}

inline Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

inline Matrix subtract(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "subtract");
  Matrix out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

inline Matrix scale(const Matrix& a, double s) {
  Matrix out = a;
  for (double& v : out.data) v *= s;
  return out;
}

// dst += src * s
inline void add_scaled(Matrix& dst, const Matrix& src, double s = 1.0) {
  require_same_shape(dst, src, "add_scaled");
  for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i] * s;
}

// a(m x k) * b(k x n)
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw Error(ErrorCode::ShapeMismatch, "matmul: " + a.shape_str() + " * " + b.shape_str());
  Matrix out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.row_ptr(i);
    double* orow = out.row_ptr(i);
    for (int k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      const double* brow = b.row_ptr(k);
      for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

// a(m x k) * b(n x k)^T
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols)
    throw Error(ErrorCode::ShapeMismatch, "matmul_nt: " + a.shape_str() + " * " + b.shape_str());
  Matrix out(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.row_ptr(i);
    double* orow = out.row_ptr(i);
    for (int j = 0; j < b.rows; ++j) {
      const double* brow = b.row_ptr(j);
      double sum = 0.0;
      for (int k = 0; k < a.cols; ++k) sum += arow[k] * brow[k];
      orow[j] = sum;
    }
  }
  return out;
}

// a(k x m)^T * b(k x n)
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows)
    throw Error(ErrorCode::ShapeMismatch, "matmul_tn: " + a.shape_str() + " * " + b.shape_str());
  Matrix out(a.cols, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.row_ptr(i);
    const double* brow = b.row_ptr(i);
    for (int k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      double* orow = out.row_ptr(k);
      for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

inline Matrix transpose(const Matrix& a) {
  Matrix out(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double d = a.data[i] - b.data[i];
    if (d < 0) d = -d;
    if (d > worst) worst = d;
  }
  return worst;
}

}  // namespace pointe
