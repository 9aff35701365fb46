#include "matrix.hpp"

#include <cmath>
#include <string>

#include "error.hpp"

namespace smoekit {

Matrix::Matrix(size_t rows, size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(size_t rows, size_t cols, Vec data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw_validation("matrix data length " + std::to_string(data_.size()) +
                     " does not equal rows*cols = " +
                     std::to_string(rows_ * cols_));
  }
  check_finite("matrix");
}

Vec Matrix::col(size_t c) const {
  Vec out(rows_);
  for (size_t r = 0; r < rows_; ++r) out[r] = at(r, c);
  return out;
}

void Matrix::set_col(size_t c, std::span<const double> values) {
  for (size_t r = 0; r < rows_; ++r) at(r, c) = values[r];
}

void Matrix::check_finite(const char* what) const {
  for (double v : data_) {
    if (!std::isfinite(v)) {
      throw_validation(std::string(what) + " contains a non-finite entry");
    }
  }
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (size_t r = 0; r < a.rows(); ++r)
    for (size_t c = 0; c < a.cols(); ++c) t.at(c, r) = a.at(r, c);
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw_validation("matmul shape mismatch: " + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()));
  }
  Matrix c(a.rows(), b.cols());
  for (size_t i = 0; i < a.rows(); ++i) {
    for (size_t k = 0; k < a.cols(); ++k) {
      const double aik = a.at(i, k);
      if (aik == 0.0) continue;
      for (size_t j = 0; j < b.cols(); ++j) c.at(i, j) += aik * b.at(k, j);
    }
  }
  return c;
}

Vec matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) {
    throw_validation("matvec shape mismatch: " + std::to_string(a.cols()) +
                     " vs " + std::to_string(x.size()));
  }
  Vec y(a.rows(), 0.0);
  for (size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace smoekit
