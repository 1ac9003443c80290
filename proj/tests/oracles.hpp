#pragma once

// Reference computations used only by the tests. They are deliberately
// plain loops with no shared code paths with the library kernels.

#include <cmath>
#include <vector>

#include "rma/matrix.hpp"

namespace oracle {

template <typename T>
rma::Matrix<T> product(const rma::Matrix<T>& a, const rma::Matrix<T>& b) {
  rma::Matrix<T> c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      T s(0);
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

template <typename T>
rma::Matrix<T> transpose(const rma::Matrix<T>& a) {
  rma::Matrix<T> t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

template <typename T>
rma::Matrix<T> eye(std::size_t n) {
  rma::Matrix<T> m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
  return m;
}

inline double fro(const rma::Matrix<double>& a, const rma::Matrix<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) s += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
  return std::sqrt(s);
}

inline double fro(const rma::Matrix<double>& a) {
  return fro(a, rma::Matrix<double>(a.rows(), a.cols()));
}

inline bool strictly_lower_zero(const rma::Matrix<double>& r) {
  for (std::size_t i = 0; i < r.rows(); ++i)
    for (std::size_t j = 0; j < i && j < r.cols(); ++j)
      if (r(i, j) != 0.0) return false;
  return true;
}

// Givens-sweep QR with its own rotation code: returns (Q, R) with A = Q R.
inline std::pair<rma::Matrix<double>, rma::Matrix<double>> givens_qr(const rma::Matrix<double>& a) {
  const std::size_t n = a.rows();
  auto r = a;
  auto qt = eye<double>(n);
  for (std::size_t k = 0; k < a.cols(); ++k)
    for (std::size_t i = n - 1; i > k; --i) {
      const double x = r(i - 1, k), y = r(i, k);
      if (y == 0.0) continue;
      const double h = std::hypot(x, y);
      const double c = x / h, s = y / h;
      for (std::size_t j = 0; j < a.cols(); ++j) {
        const double u = r(i - 1, j), v = r(i, j);
        r(i - 1, j) = c * u + s * v;
        r(i, j) = -s * u + c * v;
      }
      r(i, k) = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double u = qt(i - 1, j), v = qt(i, j);
        qt(i - 1, j) = c * u + s * v;
        qt(i, j) = -s * u + c * v;
      }
    }
  return {transpose(qt), r};
}

}  // namespace oracle
