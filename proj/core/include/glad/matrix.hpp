#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "glad/error.hpp"

namespace glad {

class Rng;

/// Dense row-major matrix of doubles. All shapes in this library (frames T,
/// feature dims d_h/d_in/d_out, expert count N, LoRA rank r) are plain
/// Matrix dimensions; there is no sparsity and no precision below 64 bits.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);  // zero-filled
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix filled(std::size_t rows, std::size_t cols, double value);
  /// Entries drawn i.i.d. uniform over [lo, hi) from `rng`.
  static Matrix random_uniform(std::size_t rows, std::size_t cols, double lo,
                               double hi, Rng& rng);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
  const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  /// "RxC", used by shape-error messages.
  std::string shape_str() const;

  Matrix transposed() const;
  bool all_finite() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double scalar);

  friend bool operator==(const Matrix& a, const Matrix& b);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double scalar);

/// a * b. Throws ShapeError naming both shapes when a.cols != b.rows.
Matrix matmul(const Matrix& a, const Matrix& b);
/// a * b^T without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// a^T * b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);

/// Elementwise product; shapes must match.
Matrix hadamard(const Matrix& a, const Matrix& b);

/// 1 x cols matrix of column sums.
Matrix col_sums(const Matrix& m);

/// Row-wise softmax with max-subtraction. Each output row sums to 1 within
/// 1e-12 and every entry lies in (0, 1]. Non-finite input throws
/// InvalidInputError.
Matrix softmax_rows(const Matrix& logits);

/// Given probs = softmax_rows(logits) and an upstream gradient w.r.t. probs,
/// returns the gradient w.r.t. logits.
Matrix softmax_rows_backward(const Matrix& probs, const Matrix& grad_probs);

/// Frobenius norm.
double frobenius_norm(const Matrix& m);

/// TSV wire format: one row per line, tab-separated decimal values with '.'
/// decimal point, no header. Shortest round-trip formatting.
void write_tsv(std::ostream& os, const Matrix& m);
Matrix read_tsv(std::istream& is);
std::string to_tsv_string(const Matrix& m);
Matrix from_tsv_string(const std::string& text);

}  // namespace glad
