#pragma once

#include <cmath>
#include <utility>

#include "rma/kernels.hpp"

namespace rma {

/// Rotation g = (c -s; s c), c^2 + s^2 = 1. Applying g^T to a pair of rows
/// (x, y) gives (c x + s y, -s x + c y).
struct GivensPair {
  double c = 1.0;
  double s = 0.0;
};

struct GivensResult {
  GivensPair g;
  double a = 0.0;  // new leading entry, |a| = sqrt(alpha^2 + gamma^2)
};

template <typename T>
struct QRResult {
  Matrix<T> q;  // orthogonal factor, A = q r
  Matrix<T> r;  // upper triangular with exact zeros below the diagonal
  OpCounter counter;
};

/// Result of cancelling the parallelogram of a stacked (dense over
/// upper-triangular) pair: q * (top; bottom) = (p_top; 0).
template <typename T>
struct QPResult {
  Matrix<T> q;      // 2n x 2n annihilating factor
  Matrix<T> p_top;  // n x n upper triangular
};

namespace detail {

template <typename T>
void require_float(const char* what) {
  if constexpr (!is_float_scalar_v<T>)
    throw Error(ErrorKind::UnsupportedScalar, std::string(what) + " is irrational; use f64 scalars");
}

}  // namespace detail

inline GivensResult givens2(double alpha, double gamma, OpCounter* ctr = nullptr) {
  if (gamma == 0.0) return {{1.0, 0.0}, alpha};
  const double delta = alpha * alpha + gamma * gamma;
  const double root = std::sqrt(delta);
  if (ctr) {
    ctr->mul_count += 2;
    ctr->addsub_count += 1;
    ctr->sqrt_count += 1;
    ctr->div_count += 2;
  }
  return {{alpha / root, gamma / root}, root};
}

template <typename T>
GivensResult givens2(const T& alpha, const T& gamma, OpCounter* ctr = nullptr) {
  detail::require_float<T>("givens2");
  return givens2(ScalarTraits<T>::to_double(alpha), ScalarTraits<T>::to_double(gamma), ctr);
}

/// Rotates rows i and i+1 from column `from_col` onward and writes an exact
/// zero at (i+1, from_col).
template <typename T>
Matrix<T> apply_givens_rows(const Matrix<T>& m, std::size_t i, const GivensPair& g, std::size_t from_col) {
  detail::require_float<T>("apply_givens_rows");
  if (i + 1 >= m.rows() || from_col >= m.cols())
    throw Error(ErrorKind::InvalidIndex, "row pair " + std::to_string(i) + "," + std::to_string(i + 1) +
                                             " / column " + std::to_string(from_col) + " out of range");
  Matrix<T> out = m;
  for (std::size_t j = from_col; j < m.cols(); ++j) {
    const T x = m(i, j), y = m(i + 1, j);
    out(i, j) = g.c * x + g.s * y;
    out(i + 1, j) = -g.s * x + g.c * y;
  }
  out(i + 1, from_col) = T(0);
  return out;
}

namespace detail {

// In-place rotation used by the factorizations: the leading entry becomes
// `lead` and the eliminated one exact zero.
inline void rotate_rows(Matrix<double>& m, std::size_t i, const GivensResult& gr, std::size_t col,
                        OpCounter& ctr) {
  const double c = gr.g.c, s = gr.g.s;
  for (std::size_t j = col + 1; j < m.cols(); ++j) {
    const double x = m(i, j), y = m(i + 1, j);
    m(i, j) = c * x + s * y;
    m(i + 1, j) = -s * x + c * y;
  }
  const std::size_t width = m.cols() - col - 1;
  ctr.mul_count += 4 * width;
  ctr.addsub_count += 2 * width;
  m(i, col) = gr.a;
  m(i + 1, col) = 0.0;
}

inline void rotate_all(Matrix<double>& m, std::size_t i, const GivensPair& g, OpCounter& ctr) {
  for (std::size_t j = 0; j < m.cols(); ++j) {
    const double x = m(i, j), y = m(i + 1, j);
    m(i, j) = g.c * x + g.s * y;
    m(i + 1, j) = -g.s * x + g.c * y;
  }
  ctr.mul_count += 4 * m.cols();
  ctr.addsub_count += 2 * m.cols();
}

}  // namespace detail

/// Column-by-column, bottom-to-top Givens elimination.
template <typename T>
QRResult<T> qr_sequential(const Matrix<T>& a) {
  detail::require_float<T>("qr_sequential");
  if constexpr (is_float_scalar_v<T>) {
    if (!a.is_square()) throw Error(ErrorKind::InvalidShape, "qr_sequential needs a square matrix");
    const std::size_t n = a.rows();
    QRResult<T> res{Matrix<T>::identity(n), a, {}};
    Matrix<T> qt = Matrix<T>::identity(n);
    for (std::size_t k = 0; k + 1 < n; ++k)
      for (std::size_t i = n - 1; i-- > k;) {
        if (res.r(i + 1, k) == 0.0) continue;
        auto gr = givens2(res.r(i, k), res.r(i + 1, k), &res.counter);
        detail::rotate_rows(res.r, i, gr, k, res.counter);
        detail::rotate_all(qt, i, gr.g, res.counter);
      }
    res.q = mat_transpose(qt);
    return res;
  } else {
    return {};
  }
}

namespace detail {

// Givens sweep over the parallelogram: columns left to right, each column
// bottom to top.
inline QPResult<double> leaf_qp(const Matrix<double>& top, const Matrix<double>& bottom, OpCounter& ctr) {
  const std::size_t n = top.cols();
  if (n == 1) {
    auto gr = givens2(top(0, 0), bottom(0, 0), &ctr);
    Matrix<double> q{{gr.g.c, gr.g.s}, {-gr.g.s, gr.g.c}};
    return {std::move(q), Matrix<double>{{gr.a}}};
  }
  Matrix<double> m = vstack(top, bottom);
  Matrix<double> q = Matrix<double>::identity(2 * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = n + j; i-- > j;) {
      if (m(i + 1, j) == 0.0) continue;
      auto gr = givens2(m(i, j), m(i + 1, j), &ctr);
      rotate_rows(m, i, gr, j, ctr);
      rotate_all(q, i, gr.g, ctr);
    }
  return {std::move(q), m.block(0, 0, n, n)};
}

template <typename T>
Matrix<T> qp_product(const Matrix<T>& a, const Matrix<T>& b, const KernelConfig& cfg, OpCounter& ctr) {
  ++ctr.qp_block_mul_calls[a.rows()];
  return multiply(a, b, cfg, ctr);
}

template <typename T>
Matrix<T> qp_product_accum(const Matrix<T>& a, const Matrix<T>& b, const Matrix<T>& c, const KernelConfig& cfg,
                           OpCounter& ctr) {
  ++ctr.qp_block_mul_calls[a.rows()];
  return mul_accum_recursive(a, b, c, cfg, ctr);
}

// Splits a 2h x 2h factor into its four h x h blocks.
template <typename T>
Quadrants<T> factor_blocks(const Matrix<T>& q) {
  return split(q);
}

template <typename T>
Matrix<T> join4x4(const std::array<std::array<const Matrix<T>*, 4>, 4>& blocks, std::size_t h) {
  Matrix<T> out(4 * h, 4 * h);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c)
      if (blocks[r][c]) out.set_block(r * h, c * h, *blocks[r][c]);
  return out;
}

/// Assembles q = Qru_bar * diag(Qlu, Qrd) * Qld_bar from the four sub-factors,
/// skipping identity and structurally zero blocks (20 block products).
template <typename T>
Matrix<T> assemble_qp_factor(const Quadrants<T>& l, const Quadrants<T>& u, const Quadrants<T>& d,
                             const Quadrants<T>& v, const KernelConfig& cfg, OpCounter& ctr) {
  const std::size_t h = l.a0.rows();
  auto q01 = qp_product(u.a1, l.a0, cfg, ctr);
  auto q02 = qp_product(u.a1, l.a1, cfg, ctr);
  auto q31 = qp_product(d.a2, l.a2, cfg, ctr);
  auto q32 = qp_product(d.a2, l.a3, cfg, ctr);
  auto p1 = qp_product(v.a0, u.a3, cfg, ctr);
  auto s1 = qp_product(v.a1, d.a0, cfg, ctr);
  auto q10 = qp_product(v.a0, u.a2, cfg, ctr);
  auto q13 = qp_product(v.a1, d.a1, cfg, ctr);
  auto p2 = qp_product(v.a2, u.a3, cfg, ctr);
  auto s2 = qp_product(v.a3, d.a0, cfg, ctr);
  auto q20 = qp_product(v.a2, u.a2, cfg, ctr);
  auto q23 = qp_product(v.a3, d.a1, cfg, ctr);
  auto q11 = qp_product_accum(p1, l.a0, qp_product(s1, l.a2, cfg, ctr), cfg, ctr);
  auto q12 = qp_product_accum(p1, l.a1, qp_product(s1, l.a3, cfg, ctr), cfg, ctr);
  auto q21 = qp_product_accum(p2, l.a0, qp_product(s2, l.a2, cfg, ctr), cfg, ctr);
  auto q22 = qp_product_accum(p2, l.a1, qp_product(s2, l.a3, cfg, ctr), cfg, ctr);
  return join4x4<T>({{{&u.a0, &q01, &q02, nullptr},
                      {&q10, &q11, &q12, &q13},
                      {&q20, &q21, &q22, &q23},
                      {nullptr, &q31, &q32, &d.a3}}},
                    h);
}

template <typename T>
QPResult<T> qp_rec(const Matrix<T>& top, const Matrix<T>& bottom, const KernelConfig& cfg, OpCounter& ctr) {
  const std::size_t n = top.cols();
  if (n <= cfg.leaf_size) return leaf_qp(top, bottom, ctr);
  if (!is_pow2(n)) throw Error(ErrorKind::InvalidShape, "recursive QP needs a power-of-two block order");
  auto a = split(top);
  auto b = split(bottom);
  // Bottom-left part, rows (1, 2).
  auto ld = qp_rec(a.a2, b.a0, cfg, ctr);
  auto l = factor_blocks(ld.q);
  auto r1 = qp_product_accum(l.a0, a.a3, qp_product(l.a1, b.a1, cfg, ctr), cfg, ctr);
  auto r2 = qp_product_accum(l.a2, a.a3, qp_product(l.a3, b.a1, cfg, ctr), cfg, ctr);
  // Top-left (rows 0, 1) and bottom-right (rows 2, 3) touch disjoint rows.
  auto lu = qp_rec(a.a0, ld.p_top, cfg, ctr);
  auto rd = qp_rec(r2, b.a3, cfg, ctr);
  auto u = factor_blocks(lu.q);
  auto r0 = qp_product_accum(u.a0, a.a1, qp_product(u.a1, r1, cfg, ctr), cfg, ctr);
  auto r1u = qp_product_accum(u.a2, a.a1, qp_product(u.a3, r1, cfg, ctr), cfg, ctr);
  // Top-right part, rows (1, 2).
  auto ru = qp_rec(r1u, rd.p_top, cfg, ctr);
  auto q = assemble_qp_factor(l, u, factor_blocks(rd.q), factor_blocks(ru.q), cfg, ctr);
  return {std::move(q), join(lu.p_top, r0, Matrix<T>(n / 2, n / 2), ru.p_top)};
}

}  // namespace detail

/// QP decomposition of a 2n x n matrix whose lower n x n block is upper
/// triangular. Returns the annihilating factor q with q * m = (p_top; 0).
template <typename T>
QPResult<T> qp_decompose(const Matrix<T>& m, const KernelConfig& cfg, OpCounter& ctr) {
  detail::require_float<T>("qp_decompose");
  if constexpr (is_float_scalar_v<T>) {
    const std::size_t n = m.cols();
    if (n == 0 || m.rows() != 2 * n) throw Error(ErrorKind::InvalidShape, "qp_decompose needs a 2n x n matrix");
    auto top = m.block(0, 0, n, n);
    auto bottom = m.block(n, 0, n, n);
    if (!is_upper_triangular(bottom))
      throw Error(ErrorKind::PreconditionViolated, "lower block of the QP input is not upper triangular");
    return detail::qp_rec(top, bottom, cfg, ctr);
  } else {
    return {};
  }
}

namespace detail {

template <typename T>
std::pair<Matrix<T>, Matrix<T>> qr_g_rec(const Matrix<T>& m, const KernelConfig& cfg, OpCounter& ctr) {
  if (m.rows() <= cfg.leaf_size) {
    auto res = qr_sequential(m);
    ctr += res.counter;
    return {std::move(res.q), std::move(res.r)};
  }
  const std::size_t h = m.rows() / 2;
  auto blocks = split(m);
  // Stage 1: C = Qc C1.
  auto [qc, c1] = qr_g_rec(blocks.a2, cfg, ctr);
  auto q1 = mat_transpose(qc);
  auto d1 = multiply(q1, blocks.a3, cfg, ctr);
  // Stage 2: cancel the parallelogram of (A; C1) and update the B columns.
  auto qp = qp_rec(blocks.a0, c1, cfg, ctr);
  auto q2 = split(qp.q);
  auto b1 = mul_accum_recursive(q2.a1, d1, multiply(q2.a0, blocks.a1, cfg, ctr), cfg, ctr);
  auto d2 = mul_accum_recursive(q2.a3, d1, multiply(q2.a2, blocks.a1, cfg, ctr), cfg, ctr);
  // Stage 3: D2 = Qd D3.
  auto [qd, d3] = qr_g_rec(d2, cfg, ctr);
  auto q3 = mat_transpose(qd);
  // diag(I, Q3) * Q2 * diag(I, Q1)
  auto x01 = multiply(q2.a1, q1, cfg, ctr);
  auto x11 = multiply(q2.a3, q1, cfg, ctr);
  auto y10 = multiply(q3, q2.a2, cfg, ctr);
  auto y11 = multiply(q3, x11, cfg, ctr);
  auto annihilator = join(q2.a0, x01, y10, y11);
  return {mat_transpose(annihilator), join(qp.p_top, b1, Matrix<T>(h, h), d3)};
}

}  // namespace detail

/// Three-stage block-recursive QR: recurse on C, cancel the parallelogram,
/// recurse on D2. Falls back to qr_sequential at the leaf order.
template <typename T>
QRResult<T> qr_g(const Matrix<T>& m, const KernelConfig& cfg) {
  detail::require_float<T>("qr_g");
  QRResult<T> res;
  if constexpr (is_float_scalar_v<T>) {
    detail::require_square_pow2(m, "qr_g");
    auto [q, r] = detail::qr_g_rec(m, cfg, res.counter);
    res.q = std::move(q);
    res.r = std::move(r);
  }
  return res;
}

}  // namespace rma
