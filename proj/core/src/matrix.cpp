#include "glad/matrix.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "glad/rng.hpp"

namespace glad {

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("Matrix: data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_str());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::filled(std::size_t rows, std::size_t cols, double value) {
  Matrix m(rows, cols);
  std::fill(m.data_.begin(), m.data_.end(), value);
  return m;
}

Matrix Matrix::random_uniform(std::size_t rows, std::size_t cols, double lo,
                              double hi, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data_) v = rng.uniform(lo, hi);
  return m;
}

std::string Matrix::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape " + a.shape_str() +
                     " does not match " + b.shape_str());
  }
}

}  // namespace

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape(*this, other, "Matrix::operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape(*this, other, "Matrix::operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double scalar) {
  for (double& v : data_) v *= scalar;
  return *this;
}

bool operator==(const Matrix& a, const Matrix& b) {
  return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double scalar) { return a *= scalar; }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: lhs " + a.shape_str() +
                     " incompatible with rhs " + b.shape_str());
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* out_row = out.row_ptr(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* b_row = b.row_ptr(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: lhs " + a.shape_str() +
                     " incompatible with rhs^T " + b.shape_str());
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* a_row = a.row_ptr(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* b_row = b.row_ptr(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a_row[k] * b_row[k];
      out(i, j) = acc;
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: lhs^T " + a.shape_str() +
                     " incompatible with rhs " + b.shape_str());
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* a_row = a.row_ptr(k);
    const double* b_row = b.row_ptr(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a_row[i];
      if (aki == 0.0) continue;
      double* out_row = out.row_ptr(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aki * b_row[j];
    }
  }
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out = a;
  for (std::size_t i = 0; i < out.data().size(); ++i)
    out.data()[i] *= b.data()[i];
  return out;
}

Matrix col_sums(const Matrix& m) {
  Matrix out(1, m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(0, c) += m(r, c);
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  if (!logits.all_finite()) {
    throw InvalidInputError("softmax_rows: input contains NaN or Inf");
  }
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const double* in_row = logits.row_ptr(r);
    double* out_row = out.row_ptr(r);
    double mx = in_row[0];
    for (std::size_t c = 1; c < logits.cols(); ++c) mx = std::max(mx, in_row[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      out_row[c] = std::exp(in_row[c] - mx);
      sum += out_row[c];
    }
    for (std::size_t c = 0; c < logits.cols(); ++c) out_row[c] /= sum;
  }
  return out;
}

Matrix softmax_rows_backward(const Matrix& probs, const Matrix& grad_probs) {
  require_same_shape(probs, grad_probs, "softmax_rows_backward");
  Matrix grad_logits(probs.rows(), probs.cols());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    const double* p = probs.row_ptr(r);
    const double* g = grad_probs.row_ptr(r);
    double dot = 0.0;
    for (std::size_t c = 0; c < probs.cols(); ++c) dot += p[c] * g[c];
    double* out = grad_logits.row_ptr(r);
    for (std::size_t c = 0; c < probs.cols(); ++c) out[c] = p[c] * (g[c] - dot);
  }
  return grad_logits;
}

double frobenius_norm(const Matrix& m) {
  double acc = 0.0;
  for (double v : m.data()) acc += v * v;
  return std::sqrt(acc);
}

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

}  // namespace

std::string to_tsv_string(const Matrix& m) {
  std::string out;
  out.reserve(m.size() * 12);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out.push_back('\t');
      append_double(out, m(r, c));
    }
    out.push_back('\n');
  }
  return out;
}

void write_tsv(std::ostream& os, const Matrix& m) { os << to_tsv_string(m); }

Matrix from_tsv_string(const std::string& text) {
  std::istringstream is(text);
  return read_tsv(is);
}

Matrix read_tsv(std::istream& is) {
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t row_cols = 0;
    std::size_t pos = 0;
    while (true) {
      std::size_t tab = line.find('\t', pos);
      std::string_view field(line.data() + pos,
                             (tab == std::string::npos ? line.size() : tab) - pos);
      double v = 0.0;
      auto res = std::from_chars(field.data(), field.data() + field.size(), v);
      if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
        throw InvalidInputError("read_tsv: bad value '" + std::string(field) +
                                "' at row " + std::to_string(rows + 1));
      }
      values.push_back(v);
      ++row_cols;
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    if (rows == 0) {
      cols = row_cols;
    } else if (row_cols != cols) {
      throw InvalidInputError("read_tsv: row " + std::to_string(rows + 1) +
                              " has " + std::to_string(row_cols) +
                              " values, expected " + std::to_string(cols));
    }
    ++rows;
  }
  if (rows == 0) throw InvalidInputError("read_tsv: empty input");
  return Matrix(rows, cols, std::move(values));
}

}  // namespace glad
