#include "mgpo/matrix.hpp"

#include <cmath>
#include <string>

namespace mgpo {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> d)
    : rows(r), cols(c), data(std::move(d)) {
  if (data.size() != rows * cols) {
    throw ShapeError("Matrix: data length " + std::to_string(data.size()) +
                     " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

bool Matrix::all_finite() const {
  for (double x : data) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool operator==(const Matrix& a, const Matrix& b) {
  return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

static std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a) + " * " + shape_str(b));
  }
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) {
        out(i, j) += aik * b(k, j);
      }
    }
  }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) out(j, i) = m(i, j);
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("add: shapes differ " + shape_str(a) + " vs " + shape_str(b));
  }
  Matrix out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

Matrix scale(const Matrix& m, double c) {
  Matrix out = m;
  for (double& x : out.data) x *= c;
  return out;
}

double global_l2_norm(std::span<const Matrix> tensors) {
  if (tensors.empty()) throw UsageError("global_l2_norm: empty tensor sequence");
  double sum = 0.0;
  for (const Matrix& t : tensors) {
    for (double x : t.data) sum += x * x;
  }
  return std::sqrt(sum);
}

}  // namespace mgpo
