#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace smoekit {

using Vec = std::vector<double>;

// Dense row-major matrix of 64-bit floats. All computation in the toolkit is
// carried out in doubles; 32-bit floats appear only in file formats.
class Matrix {
 public:
  Matrix() = default;

  // Zero-initialized rows x cols matrix.
  Matrix(size_t rows, size_t cols);

  // Takes ownership of row-major data; validates size and finiteness.
  Matrix(size_t rows, size_t cols, Vec data);

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  size_t size() const { return data_.size(); }

  double& at(size_t r, size_t c) { return data_[r * cols_ + c]; }
  double at(size_t r, size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  Vec& data() { return data_; }
  const Vec& data() const { return data_; }

  Vec col(size_t c) const;
  void set_col(size_t c, std::span<const double> values);

  // Throws a validation error if any entry is NaN or infinite.
  void check_finite(const char* what) const;

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  Vec data_;
};

Matrix transpose(const Matrix& a);

// c = a * b.
Matrix matmul(const Matrix& a, const Matrix& b);

// y = a * x  (column-vector convention).
Vec matvec(const Matrix& a, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

}  // namespace smoekit
