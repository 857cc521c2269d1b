#include "posergcn/matrix.hpp"

#include <algorithm>
#include <cmath>

namespace posergcn {

size_t Matrix::checked_size(int rows, int cols) {
  if (rows <= 0 || cols <= 0)
    throw ArgumentError("matrix dimensions must be positive, got " + std::to_string(rows) + "x" +
                        std::to_string(cols));
  return static_cast<size_t>(rows) * static_cast<size_t>(cols);
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const int r = static_cast<int>(rows.size());
  const int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
  Matrix m(r, c);
  int i = 0;
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != c)
      throw ArgumentError("ragged initializer: row " + std::to_string(i));
    int j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions differ, " + shape_str(a) + " times " +
                         shape_str(b));
  Matrix out(a.rows(), b.cols());
  // ikj order keeps the inner loop contiguous in both b and out.
  for (int i = 0; i < a.rows(); ++i) {
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix out(a.rows(), a.cols());
  for (int i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "sub");
  Matrix out(a.rows(), a.cols());
  for (int i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out(a.rows(), a.cols());
  for (int i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

Matrix scale(const Matrix& a, double s) {
  Matrix out(a.rows(), a.cols());
  for (int i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Matrix add_rowvec(const Matrix& x, const Matrix& row) {
  if (row.rows() != 1 || row.cols() != x.cols())
    throw DimensionError("add_rowvec: " + shape_str(x) + " plus row " + shape_str(row));
  Matrix out(x.rows(), x.cols());
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j) out(i, j) = x(i, j) + row(0, j);
  return out;
}

Matrix colsum(const Matrix& a) {
  Matrix out(1, a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(0, j) += a(i, j);
  return out;
}

Matrix rows_mean(const Matrix& a) { return scale(colsum(a), 1.0 / a.rows()); }

double sum_all(const Matrix& a) {
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i) s += a[i];
  return s;
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i) s += a[i] * a[i];
  return std::sqrt(s);
}

std::vector<double> softmax_vector(const std::vector<double>& scores) {
  if (scores.empty()) throw ArgumentError("softmax_vector: empty input");
  const double m = *std::max_element(scores.begin(), scores.end());
  std::vector<double> out(scores.size());
  double z = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - m);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

}  // namespace posergcn
