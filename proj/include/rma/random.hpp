#pragma once

#include <cstdint>
#include <random>

#include "rma/matrix.hpp"

namespace rma {

// Seeded generators. Integer entries come straight from mt19937_64 output
// (no std distributions) so sequences are identical across standard libraries.
class MatrixGenerator {
 public:
  explicit MatrixGenerator(std::uint64_t seed) : engine_(seed) {}

  long long small_int(long long lo, long long hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<long long>(engine_() % span);
  }

  template <typename T>
  Matrix<T> dense(std::size_t rows, std::size_t cols, long long lo = -9, long long hi = 9) {
    Matrix<T> m(rows, cols);
    for (auto& v : m.data()) v = ScalarTraits<T>::from_int(small_int(lo, hi));
    return m;
  }

  template <typename T>
  Matrix<T> square(std::size_t n) {
    return dense<T>(n, n);
  }

  /// Lower triangular with diagonal entries in [1, 9] up to sign.
  template <typename T>
  Matrix<T> lower_triangular(std::size_t n) {
    Matrix<T> m(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        long long v = small_int(-9, 9);
        if (i == j) {
          v = small_int(1, 9);
          if (small_int(0, 1)) v = -v;
        }
        m(i, j) = ScalarTraits<T>::from_int(v);
      }
    return m;
  }

  /// Strictly diagonally dominant, so every leading principal block is invertible.
  template <typename T>
  Matrix<T> diagonally_dominant(std::size_t n) {
    Matrix<T> m = dense<T>(n, n, -4, 4);
    for (std::size_t i = 0; i < n; ++i) {
      long long row = 0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) row += std::llabs(static_cast<long long>(ScalarTraits<T>::to_double(m(i, j))));
      m(i, i) = ScalarTraits<T>::from_int(row + small_int(1, 5));
    }
    return m;
  }

  /// G*G^T + n*I with G dense random.
  Matrix<double> spd(std::size_t n) {
    Matrix<double> g = dense<double>(n, n);
    Matrix<double> a(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += g(i, k) * g(j, k);
        a(i, j) = s;
      }
    for (std::size_t i = 0; i < n; ++i) a(i, i) += static_cast<double>(n);
    return a;
  }

  /// Upper triangular (exact zeros below the diagonal).
  template <typename T>
  Matrix<T> upper_triangular(std::size_t n) {
    Matrix<T> m(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) m(i, j) = ScalarTraits<T>::from_int(small_int(-9, 9));
    return m;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rma
