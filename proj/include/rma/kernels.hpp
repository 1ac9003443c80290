#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>

#include "rma/matrix.hpp"

namespace rma {

enum class MultiplyAlgo { Standard, Strassen };

/// Rational direct (MA1) vs irrational direct (MA2). Metadata only.
enum class AlgorithmClass { MA1, MA2 };

struct KernelConfig {
  std::size_t leaf_size = 16;
  MultiplyAlgo multiply_algo = MultiplyAlgo::Standard;
  AlgorithmClass class_tag = AlgorithmClass::MA1;

  void validate() const {
    if (!is_pow2(leaf_size))
      throw Error(ErrorKind::PreconditionViolated, "leaf_size must be a power of two >= 1");
  }
};

/// Scalar operations are counted at the leaves. Block multiplications are
/// counted per call and per operand order, recursive calls included.
struct OpCounter {
  std::uint64_t mul_count = 0;
  std::uint64_t addsub_count = 0;
  std::uint64_t div_count = 0;
  std::uint64_t sqrt_count = 0;
  std::map<std::size_t, std::uint64_t> block_mul_calls;
  // Products issued directly by a QP recursion level (not counting the
  // multiplier's own internal recursion).
  std::map<std::size_t, std::uint64_t> qp_block_mul_calls;

  std::uint64_t scalar_ops() const { return mul_count + addsub_count + div_count + sqrt_count; }

  std::uint64_t block_muls_at(std::size_t order) const {
    auto it = block_mul_calls.find(order);
    return it == block_mul_calls.end() ? 0 : it->second;
  }

  std::uint64_t qp_block_muls() const {
    std::uint64_t total = 0;
    for (const auto& [order, count] : qp_block_mul_calls) total += count;
    return total;
  }

  OpCounter& operator+=(const OpCounter& o) {
    mul_count += o.mul_count;
    addsub_count += o.addsub_count;
    div_count += o.div_count;
    sqrt_count += o.sqrt_count;
    for (const auto& [k, v] : o.block_mul_calls) block_mul_calls[k] += v;
    for (const auto& [k, v] : o.qp_block_mul_calls) qp_block_mul_calls[k] += v;
    return *this;
  }
};

namespace detail {

template <typename T>
void require_square_pow2(const Matrix<T>& a, const char* what) {
  if (!a.is_square() || !is_pow2(a.rows()))
    throw Error(ErrorKind::InvalidShape, std::string(what) + " needs a square power-of-two matrix, got " +
                                             std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
}

template <typename T>
void require_same_order(const Matrix<T>& a, const Matrix<T>& b, const char* what) {
  require_square_pow2(a, what);
  if (!b.is_square() || b.rows() != a.rows())
    throw Error(ErrorKind::InvalidShape, std::string(what) + " operand orders differ");
}

// c + a*b with a fixed left-to-right accumulation order per entry.
template <typename T>
Matrix<T> leaf_mul_accum(const Matrix<T>& a, const Matrix<T>& b, const Matrix<T>* c, OpCounter& ctr) {
  const std::size_t n = a.rows(), m = b.cols(), inner = a.cols();
  Matrix<T> out(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      T s = c ? (*c)(i, j) : T(0);
      for (std::size_t k = 0; k < inner; ++k) s += a(i, k) * b(k, j);
      out(i, j) = std::move(s);
    }
  ctr.mul_count += n * m * inner;
  ctr.addsub_count += n * m * inner;
  return out;
}

template <typename T>
Matrix<T> counted_add(const Matrix<T>& a, const Matrix<T>& b, int sign, OpCounter& ctr) {
  ctr.addsub_count += a.rows() * a.cols();
  return mat_add(a, b, sign);
}

}  // namespace detail

/// Naive triple loop; the reference every recursive product is checked against.
template <typename T>
Matrix<T> naive_multiply(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) throw Error(ErrorKind::InvalidShape, "naive_multiply inner dimension mismatch");
  Matrix<T> out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      T s(0);
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

/// A*B + C via D0 = A0B0 + (A1B2 + C0), D1 = A0B1 + (A1B3 + C1),
/// D2 = A2B0 + (A3B2 + C2), D3 = A2B1 + (A3B3 + C3).
template <typename T>
Matrix<T> mul_accum_recursive(const Matrix<T>& a, const Matrix<T>& b, const Matrix<T>& c,
                              const KernelConfig& cfg, OpCounter& ctr) {
  detail::require_same_order(a, b, "mul_accum_recursive");
  detail::require_same_order(a, c, "mul_accum_recursive");
  const std::size_t n = a.rows();
  ++ctr.block_mul_calls[n];
  if (n <= cfg.leaf_size) return detail::leaf_mul_accum(a, b, &c, ctr);
  auto qa = split(a), qb = split(b), qc = split(c);
  auto d0 = mul_accum_recursive(qa.a0, qb.a0, mul_accum_recursive(qa.a1, qb.a2, qc.a0, cfg, ctr), cfg, ctr);
  auto d1 = mul_accum_recursive(qa.a0, qb.a1, mul_accum_recursive(qa.a1, qb.a3, qc.a1, cfg, ctr), cfg, ctr);
  auto d2 = mul_accum_recursive(qa.a2, qb.a0, mul_accum_recursive(qa.a3, qb.a2, qc.a2, cfg, ctr), cfg, ctr);
  auto d3 = mul_accum_recursive(qa.a2, qb.a1, mul_accum_recursive(qa.a3, qb.a3, qc.a3, cfg, ctr), cfg, ctr);
  return join(d0, d1, d2, d3);
}

/// A*B with the standard block recursion: four plain products feed four
/// accumulating products (the C-less form of mul_accum_recursive).
template <typename T>
Matrix<T> mul_standard(const Matrix<T>& a, const Matrix<T>& b, const KernelConfig& cfg, OpCounter& ctr) {
  detail::require_same_order(a, b, "multiply");
  const std::size_t n = a.rows();
  ++ctr.block_mul_calls[n];
  if (n <= cfg.leaf_size) return detail::leaf_mul_accum<T>(a, b, nullptr, ctr);
  auto qa = split(a), qb = split(b);
  auto t0 = mul_standard(qa.a1, qb.a2, cfg, ctr);
  auto t1 = mul_standard(qa.a1, qb.a3, cfg, ctr);
  auto t2 = mul_standard(qa.a3, qb.a2, cfg, ctr);
  auto t3 = mul_standard(qa.a3, qb.a3, cfg, ctr);
  return join(mul_accum_recursive(qa.a0, qb.a0, t0, cfg, ctr), mul_accum_recursive(qa.a0, qb.a1, t1, cfg, ctr),
              mul_accum_recursive(qa.a2, qb.a0, t2, cfg, ctr), mul_accum_recursive(qa.a2, qb.a1, t3, cfg, ctr));
}

/// The seven Strassen operand pairs for one recursion level, in product order.
template <typename T>
std::array<std::pair<Matrix<T>, Matrix<T>>, 7> strassen_operands(const Quadrants<T>& qa, const Quadrants<T>& qb,
                                                                   OpCounter& ctr) {
  using detail::counted_add;
  return {{
      {counted_add(qa.a0, qa.a3, +1, ctr), counted_add(qb.a0, qb.a3, +1, ctr)},
      {counted_add(qa.a2, qa.a3, +1, ctr), qb.a0},
      {qa.a0, counted_add(qb.a1, qb.a3, -1, ctr)},
      {qa.a3, counted_add(qb.a2, qb.a0, -1, ctr)},
      {counted_add(qa.a0, qa.a1, +1, ctr), qb.a3},
      {counted_add(qa.a2, qa.a0, -1, ctr), counted_add(qb.a0, qb.a1, +1, ctr)},
      {counted_add(qa.a1, qa.a3, -1, ctr), counted_add(qb.a2, qb.a3, +1, ctr)},
  }};
}

/// Combines the seven products P1..P7 into the four result quadrants.
template <typename T>
Matrix<T> strassen_combine(const std::array<Matrix<T>, 7>& p, OpCounter& ctr) {
  using detail::counted_add;
  auto d0 = counted_add(counted_add(counted_add(p[0], p[3], +1, ctr), p[4], -1, ctr), p[6], +1, ctr);
  auto d1 = counted_add(p[2], p[4], +1, ctr);
  auto d2 = counted_add(p[1], p[3], +1, ctr);
  auto d3 = counted_add(counted_add(counted_add(p[0], p[1], -1, ctr), p[2], +1, ctr), p[5], +1, ctr);
  return join(d0, d1, d2, d3);
}

/// A*B with seven recursive products per level; standard leaf product.
template <typename T>
Matrix<T> mul_strassen(const Matrix<T>& a, const Matrix<T>& b, const KernelConfig& cfg, OpCounter& ctr) {
  detail::require_same_order(a, b, "mul_strassen");
  const std::size_t n = a.rows();
  ++ctr.block_mul_calls[n];
  if (n <= cfg.leaf_size) return detail::leaf_mul_accum<T>(a, b, nullptr, ctr);
  auto ops = strassen_operands(split(a), split(b), ctr);
  std::array<Matrix<T>, 7> p;
  for (std::size_t k = 0; k < 7; ++k) p[k] = mul_strassen(ops[k].first, ops[k].second, cfg, ctr);
  return strassen_combine(p, ctr);
}

/// A*B using the configured algorithm.
template <typename T>
Matrix<T> multiply(const Matrix<T>& a, const Matrix<T>& b, const KernelConfig& cfg, OpCounter& ctr) {
  return cfg.multiply_algo == MultiplyAlgo::Strassen ? mul_strassen(a, b, cfg, ctr) : mul_standard(a, b, cfg, ctr);
}

/// -(A*B), computed as (-A)*B.
template <typename T>
Matrix<T> mul_neg(const Matrix<T>& a, const Matrix<T>& b, const KernelConfig& cfg, OpCounter& ctr) {
  return multiply(mat_negate(a), b, cfg, ctr);
}

// ---------------------------------------------------------------------------
// Triangular inversion

namespace detail {

// Column-by-column forward substitution; `offset` maps local diagonal
// indices back to the caller's matrix for error reporting.
template <typename T>
Matrix<T> leaf_inv_lower(const Matrix<T>& l, std::size_t offset, OpCounter& ctr) {
  const std::size_t n = l.rows();
  for (std::size_t i = 0; i < n; ++i)
    if (ScalarTraits<T>::is_zero(l(i, i))) throw Error(ErrorKind::Singular, "zero diagonal entry", offset + i);
  Matrix<T> x(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    x(j, j) = T(1) / l(j, j);
    ++ctr.div_count;
    for (std::size_t i = j + 1; i < n; ++i) {
      T s(0);
      for (std::size_t k = j; k < i; ++k) s += l(i, k) * x(k, j);
      ctr.mul_count += i - j;
      ctr.addsub_count += i - j;
      x(i, j) = -s / l(i, i);
      ++ctr.div_count;
    }
  }
  return x;
}

template <typename T>
Matrix<T> inv_lower_rec(const Matrix<T>& a, std::size_t offset, const KernelConfig& cfg, OpCounter& ctr) {
  const std::size_t n = a.rows();
  if (n <= cfg.leaf_size) return leaf_inv_lower(a, offset, ctr);
  auto q = split(a);
  auto f = inv_lower_rec(q.a0, offset, cfg, ctr);
  auto g = inv_lower_rec(q.a3, offset + n / 2, cfg, ctr);
  auto h = multiply(q.a2, f, cfg, ctr);
  auto x = mul_neg(g, h, cfg, ctr);
  return join(f, Matrix<T>(n / 2, n / 2), x, g);
}

}  // namespace detail

/// Inverse of a lower triangular matrix: (A 0; B C)^-1 = (A^-1 0; -C^-1 B A^-1  C^-1).
template <typename T>
Matrix<T> inv_lower_triangular(const Matrix<T>& a, const KernelConfig& cfg, OpCounter& ctr) {
  detail::require_square_pow2(a, "inv_lower_triangular");
  if (!is_lower_triangular(a)) throw Error(ErrorKind::PreconditionViolated, "input is not lower triangular");
  return detail::inv_lower_rec(a, 0, cfg, ctr);
}

// ---------------------------------------------------------------------------
// Cholesky

template <typename T>
struct CholeskyResult {
  Matrix<T> h;
  Matrix<T> h_inv;
};

namespace detail {

template <typename T>
CholeskyResult<T> leaf_cholesky(const Matrix<T>& a, std::size_t offset, OpCounter& ctr) {
  const std::size_t n = a.rows();
  Matrix<T> h(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    T d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= h(j, k) * h(j, k);
    ctr.mul_count += j;
    ctr.addsub_count += j;
    if (!(d > 0)) throw Error(ErrorKind::NotPositiveDefinite, "non-positive pivot", offset + j);
    h(j, j) = ScalarTraits<T>::sqrt(d);
    ++ctr.sqrt_count;
    for (std::size_t i = j + 1; i < n; ++i) {
      T s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= h(i, k) * h(j, k);
      ctr.mul_count += j;
      ctr.addsub_count += j;
      h(i, j) = s / h(j, j);
      ++ctr.div_count;
    }
  }
  auto h_inv = leaf_inv_lower(h, offset, ctr);
  return {std::move(h), std::move(h_inv)};
}

template <typename T>
CholeskyResult<T> cholesky_rec(const Matrix<T>& a, std::size_t offset, const KernelConfig& cfg, OpCounter& ctr) {
  const std::size_t n = a.rows();
  if (n <= cfg.leaf_size) return leaf_cholesky(a, offset, ctr);
  const std::size_t half = n / 2;
  auto q = split(a);
  auto [b, b_inv] = cholesky_rec(q.a0, offset, cfg, ctr);
  // C = A2^T (B^-1)^T, the transposed form forced by H H^T = A.
  auto c = multiply(mat_transpose(q.a1), mat_transpose(b_inv), cfg, ctr);
  auto f = counted_add(q.a3, mul_neg(c, mat_transpose(c), cfg, ctr), +1, ctr);
  auto [d, d_inv] = cholesky_rec(f, offset + half, cfg, ctr);
  auto corner = mul_neg(d_inv, multiply(c, b_inv, cfg, ctr), cfg, ctr);
  Matrix<T> zero(half, half);
  return {join(b, zero, c, d), join(b_inv, zero, corner, d_inv)};
}

}  // namespace detail

/// Recursive Cholesky returning (H, H^-1) with A = H H^T. Binary64 only.
template <typename T>
CholeskyResult<T> cholesky(const Matrix<T>& a, const KernelConfig& cfg, OpCounter& ctr) {
  if constexpr (!is_float_scalar_v<T>) {
    throw Error(ErrorKind::UnsupportedScalar, "cholesky needs square roots; use f64 scalars");
  } else {
    detail::require_square_pow2(a, "cholesky");
    return detail::cholesky_rec(a, 0, cfg, ctr);
  }
}

// ---------------------------------------------------------------------------
// Strassen inversion

namespace detail {

// Gauss-Jordan on [A | I]. Binary64 picks the largest pivot in the column;
// rationals take the first nonzero one.
template <typename T>
Matrix<T> leaf_inverse(const Matrix<T>& a, OpCounter& ctr) {
  const std::size_t n = a.rows();
  Matrix<T> w = a;
  Matrix<T> inv = Matrix<T>::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = n;
    if constexpr (is_float_scalar_v<T>) {
      double best = 0.0;
      for (std::size_t r = col; r < n; ++r)
        if (std::abs(w(r, col)) > best) {
          best = std::abs(w(r, col));
          piv = r;
        }
    } else {
      for (std::size_t r = col; r < n && piv == n; ++r)
        if (!ScalarTraits<T>::is_zero(w(r, col))) piv = r;
    }
    if (piv == n) throw Error(ErrorKind::Singular, "matrix is singular", col);
    if (piv != col)
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(w(piv, j), w(col, j));
        std::swap(inv(piv, j), inv(col, j));
      }
    const T p = w(col, col);
    for (std::size_t j = 0; j < n; ++j) {
      w(col, j) /= p;
      inv(col, j) /= p;
    }
    ctr.div_count += 2 * n;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col || ScalarTraits<T>::is_zero(w(r, col))) continue;
      const T factor = w(r, col);
      for (std::size_t j = 0; j < n; ++j) {
        w(r, j) -= factor * w(col, j);
        inv(r, j) -= factor * inv(col, j);
      }
      ctr.mul_count += 2 * n;
      ctr.addsub_count += 2 * n;
    }
  }
  return inv;
}

template <typename T>
Matrix<T> inv_strassen_rec(const Matrix<T>& a, std::size_t level, const KernelConfig& cfg, OpCounter& ctr) {
  if (a.rows() <= cfg.leaf_size) return leaf_inverse(a, ctr);
  auto q = split(a);
  Matrix<T> y;  // A0^-1, so M0 = -y
  try {
    y = inv_strassen_rec(q.a0, level + 1, cfg, ctr);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Singular) throw;
    throw Error(ErrorKind::PivotBlockSingular, "leading block A0 is singular", level);
  }
  auto m1 = mul_neg(y, q.a1, cfg, ctr);
  auto m2 = mul_neg(q.a2, y, cfg, ctr);
  auto m3 = multiply(m2, q.a1, cfg, ctr);
  auto m4 = inv_strassen_rec(counted_add(q.a3, m3, +1, ctr), level + 1, cfg, ctr);
  auto m5 = multiply(m4, m2, cfg, ctr);  // bottom-left block is +S^-1 A2 M0
  auto m6 = mul_accum_recursive(m1, m5, y, cfg, ctr);  // M1 M5 - M0
  auto m1m4 = multiply(m1, m4, cfg, ctr);
  return join(m6, m1m4, m5, m4);
}

}  // namespace detail

/// Block inverse through M0..M6 without cross-quadrant pivoting.
template <typename T>
Matrix<T> inv_strassen(const Matrix<T>& a, const KernelConfig& cfg, OpCounter& ctr) {
  detail::require_square_pow2(a, "inv_strassen");
  return detail::inv_strassen_rec(a, 0, cfg, ctr);
}

}  // namespace rma
