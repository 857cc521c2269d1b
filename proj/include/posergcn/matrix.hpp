#pragma once

#include <cmath>
#include <initializer_list>
#include <string>
#include <vector>

#include "posergcn/errors.hpp"

namespace posergcn {

/// Dense row-major matrix of 64-bit floats. The single value type behind
/// graph states, parameters, features and metrics in this project.
class Matrix {
 public:
  Matrix() = default;

  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(checked_size(rows, cols), fill) {}

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix full(int rows, int cols, double v) { return Matrix(rows, cols, v); }

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int size() const { return rows_ * cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double& operator[](int i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int i) const { return data_[static_cast<size_t>(i)]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  static size_t checked_size(int rows, int cols);

  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

/// "RxC" shape string used in dimension-error messages.
std::string shape_str(const Matrix& m);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
Matrix transpose(const Matrix& a);

/// Adds a 1xC row vector to every row of a RxC matrix.
Matrix add_rowvec(const Matrix& x, const Matrix& row);

/// Column sums as a 1xC row vector.
Matrix colsum(const Matrix& a);

/// Mean over rows as a 1xC row vector.
Matrix rows_mean(const Matrix& a);

double sum_all(const Matrix& a);
double frobenius_norm(const Matrix& a);

template <class F>
Matrix apply(const Matrix& a, F&& f) {
  Matrix out(a.rows(), a.cols());
  for (int i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

/// Numerically stable softmax (max-subtraction). Output is positive and
/// sums to 1 within 1e-12.
std::vector<double> softmax_vector(const std::vector<double>& scores);

}  // namespace posergcn
