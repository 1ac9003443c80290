#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "rma/error.hpp"
#include "rma/scalar.hpp"

namespace rma {

inline constexpr bool is_pow2(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

inline constexpr std::size_t next_pow2(std::size_t n) noexcept {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// Dense row-major matrix. Block operations copy; nothing aliases.
///
/// `logical_rows`/`logical_cols` remember the pre-padding shape so that a
/// padded result can be cropped back.
template <typename T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), logical_rows_(rows), logical_cols_(cols), data_(rows * cols, T(0)) {}

  Matrix(std::initializer_list<std::initializer_list<T>> init) {
    rows_ = init.size();
    cols_ = rows_ ? init.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& row : init) {
      if (row.size() != cols_) throw Error(ErrorKind::InvalidShape, "ragged initializer");
      data_.insert(data_.end(), row.begin(), row.end());
    }
    logical_rows_ = rows_;
    logical_cols_ = cols_;
  }

  static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t logical_rows() const noexcept { return logical_rows_; }
  std::size_t logical_cols() const noexcept { return logical_cols_; }
  bool empty() const noexcept { return data_.empty(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  void set_logical_shape(std::size_t rows, std::size_t cols) {
    logical_rows_ = rows;
    logical_cols_ = cols;
  }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  const std::vector<T>& data() const noexcept { return data_; }
  std::vector<T>& data() noexcept { return data_; }

  Matrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
    if (r0 + nr > rows_ || c0 + nc > cols_) throw Error(ErrorKind::InvalidShape, "block out of range");
    Matrix out(nr, nc);
    for (std::size_t i = 0; i < nr; ++i)
      std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>((r0 + i) * cols_ + c0), nc,
                  out.data_.begin() + static_cast<std::ptrdiff_t>(i * nc));
    return out;
  }

  void set_block(std::size_t r0, std::size_t c0, const Matrix& b) {
    if (r0 + b.rows_ > rows_ || c0 + b.cols_ > cols_)
      throw Error(ErrorKind::InvalidShape, "set_block out of range");
    for (std::size_t i = 0; i < b.rows_; ++i)
      std::copy_n(b.data_.begin() + static_cast<std::ptrdiff_t>(i * b.cols_), b.cols_,
                  data_.begin() + static_cast<std::ptrdiff_t>((r0 + i) * cols_ + c0));
  }

  /// Value equality (element-wise ==); see `bitwise_equal` for binary64 bit identity.
  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t logical_rows_ = 0;
  std::size_t logical_cols_ = 0;
  std::vector<T> data_;
};

template <typename T>
struct Quadrants {
  Matrix<T> a0;  // top-left
  Matrix<T> a1;  // top-right
  Matrix<T> a2;  // bottom-left
  Matrix<T> a3;  // bottom-right
};

enum class PaddingScheme { ZeroPad, IdentityPad };

template <typename T>
bool bitwise_equal(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (std::size_t k = 0; k < a.data().size(); ++k)
    if (!ScalarTraits<T>::bitwise_equal(a.data()[k], b.data()[k])) return false;
  return true;
}

template <typename T>
Matrix<T> pad_to_pow2(const Matrix<T>& m, PaddingScheme scheme) {
  if (m.empty()) throw Error(ErrorKind::InvalidShape, "cannot pad an empty matrix");
  const std::size_t order = next_pow2(std::max(m.rows(), m.cols()));
  Matrix<T> out(order, order);
  out.set_block(0, 0, m);
  if (scheme == PaddingScheme::IdentityPad) {
    for (std::size_t i = 0; i < order; ++i)
      if (i >= m.rows() || i >= m.cols()) out(i, i) = T(1);
  }
  out.set_logical_shape(m.logical_rows(), m.logical_cols());
  return out;
}

template <typename T>
Matrix<T> crop_to_logical(const Matrix<T>& m) {
  return m.block(0, 0, m.logical_rows(), m.logical_cols());
}

template <typename T>
Quadrants<T> split(const Matrix<T>& m) {
  if (!m.is_square() || m.rows() % 2 != 0 || m.rows() == 0)
    throw Error(ErrorKind::InvalidShape,
                "split needs a square matrix of even order, got " + std::to_string(m.rows()) + "x" +
                    std::to_string(m.cols()));
  const std::size_t h = m.rows() / 2;
  return {m.block(0, 0, h, h), m.block(0, h, h, h), m.block(h, 0, h, h), m.block(h, h, h, h)};
}

template <typename T>
Matrix<T> join(const Matrix<T>& a0, const Matrix<T>& a1, const Matrix<T>& a2, const Matrix<T>& a3) {
  const std::size_t h = a0.rows();
  for (const Matrix<T>* b : {&a0, &a1, &a2, &a3})
    if (b->rows() != h || b->cols() != h)
      throw Error(ErrorKind::InvalidShape, "join needs four square blocks of equal order");
  Matrix<T> out(2 * h, 2 * h);
  out.set_block(0, 0, a0);
  out.set_block(0, h, a1);
  out.set_block(h, 0, a2);
  out.set_block(h, h, a3);
  return out;
}

template <typename T>
Matrix<T> join(const Quadrants<T>& q) {
  return join(q.a0, q.a1, q.a2, q.a3);
}

/// Stack `top` over `bottom` (equal column counts).
template <typename T>
Matrix<T> vstack(const Matrix<T>& top, const Matrix<T>& bottom) {
  if (top.cols() != bottom.cols()) throw Error(ErrorKind::InvalidShape, "vstack column mismatch");
  Matrix<T> out(top.rows() + bottom.rows(), top.cols());
  out.set_block(0, 0, top);
  out.set_block(top.rows(), 0, bottom);
  return out;
}

template <typename T>
Matrix<T> mat_add(const Matrix<T>& a, const Matrix<T>& b, int sign = +1) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorKind::InvalidShape, "mat_add shape mismatch");
  Matrix<T> out(a.rows(), a.cols());
  for (std::size_t k = 0; k < a.data().size(); ++k)
    out.data()[k] = sign >= 0 ? a.data()[k] + b.data()[k] : a.data()[k] - b.data()[k];
  return out;
}

template <typename T>
Matrix<T> mat_transpose(const Matrix<T>& a) {
  Matrix<T> out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

template <typename T>
Matrix<T> mat_negate(const Matrix<T>& a) {
  Matrix<T> out(a.rows(), a.cols());
  for (std::size_t k = 0; k < a.data().size(); ++k) out.data()[k] = -a.data()[k];
  return out;
}

/// sqrt(sum (a_ij - b_ij)^2) in binary64; rational differences are taken exactly first.
template <typename T>
double frobenius_distance(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorKind::InvalidShape, "frobenius_distance shape mismatch");
  double sum = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k) {
    const T diff = a.data()[k] - b.data()[k];
    const double d = ScalarTraits<T>::to_double(diff);
    sum += d * d;
  }
  return std::sqrt(sum);
}

template <typename T>
double frobenius_norm(const Matrix<T>& a) {
  return frobenius_distance(a, Matrix<T>(a.rows(), a.cols()));
}

template <typename T>
bool is_lower_triangular(const Matrix<T>& a) {
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j)
      if (!ScalarTraits<T>::is_zero(a(i, j))) return false;
  return true;
}

/// Exact zeros below the diagonal.
template <typename T>
bool is_upper_triangular(const Matrix<T>& a) {
  for (std::size_t i = 1; i < a.rows(); ++i)
    for (std::size_t j = 0; j < std::min(i, a.cols()); ++j)
      if (!ScalarTraits<T>::is_zero(a(i, j))) return false;
  return true;
}

template <typename To, typename From>
Matrix<To> convert(const Matrix<From>& m) {
  Matrix<To> out(m.rows(), m.cols());
  for (std::size_t k = 0; k < m.data().size(); ++k) {
    if constexpr (std::is_same_v<To, double>)
      out.data()[k] = ScalarTraits<From>::to_double(m.data()[k]);
    else
      out.data()[k] = To(m.data()[k]);
  }
  out.set_logical_shape(m.logical_rows(), m.logical_cols());
  return out;
}

}  // namespace rma
