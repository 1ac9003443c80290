#pragma once

#include <cmath>
#include <cstdint>

#include "rma/qr.hpp"
#include "rma/random.hpp"

namespace rma {

/// Block multiplication cost model M(n) = gamma * n^beta.
struct ComplexityModel {
  double gamma = 2.0;
  double beta = 3.0;

  void validate() const {
    if (beta == 1.0 || beta == 2.0)
      throw Error(ErrorKind::ModelSingular, "closed forms divide by 2^beta - 4 and 2^beta - 2");
    if (!(gamma > 0.0) || !(beta > 2.0 && beta <= 3.0))
      throw Error(ErrorKind::PreconditionViolated, "model needs gamma > 0 and 2 < beta <= 3");
  }

  double multiply_cost(double n) const { return gamma * std::pow(n, beta); }
};

namespace detail {

inline void require_complexity_order(double n) {
  if (n < 2.0 || !is_pow2(static_cast<std::size_t>(n)) || n != std::floor(n))
    throw Error(ErrorKind::PreconditionViolated, "order must be a power of two >= 2");
}

// Base value of the parallelogram cost: a single 2x1 cancellation is one
// Givens pair (two squares, one add, one root, two divisions).
inline constexpr double kParallelogramBase = 6.0;

}  // namespace detail

/// Parallelogram-cancellation cost for an n-row stacked input (n x n factor),
/// the solution of Cp(2n) = 4 Cp(n) + 24 M(n/2) with Cp(2) = 6:
///   Cp(n) = 24 gamma n^beta / (2^beta (2^beta - 4)) + (3 n^2 / 2)(1 - 4 gamma / (2^beta - 4)).
inline double predicted_cp(double n, const ComplexityModel& model) {
  model.validate();
  detail::require_complexity_order(n);
  const double p = std::pow(2.0, model.beta);
  const double lead = 24.0 * model.gamma / (p * (p - 4.0));
  const double quad = (detail::kParallelogramBase - lead * p) / 4.0;
  return lead * std::pow(n, model.beta) + quad * n * n;
}

/// Three-stage QR cost, the solution of C(n) = 2 C(n/2) + Cp(n) + 6 M(n/2)
/// with C(1) = 0 and Cp from predicted_cp.
inline double predicted_c(double n, const ComplexityModel& model) {
  model.validate();
  detail::require_complexity_order(n);
  const double p = std::pow(2.0, model.beta);
  const double lead_cp = 24.0 * model.gamma / (p * (p - 4.0));
  const double quad_cp = (detail::kParallelogramBase - lead_cp * p) / 4.0;
  const double lead = 6.0 * model.gamma * p / ((p - 4.0) * (p - 2.0));
  const double quad = 2.0 * quad_cp;
  const double lin = -lead - quad;
  return lead * std::pow(n, model.beta) + quad * n * n + lin * n;
}

/// Shorter closed form for Cp:
///   6 gamma n^beta / (2^beta (2^beta - 4)) + (3 n^2 / 2)(1 - gamma / (2^beta - 4)).
/// It solves Cp(2n) = 4 Cp(n) + 6 M(n/2), not the 24-product recurrence.
inline double short_form_cp(double n, const ComplexityModel& model) {
  model.validate();
  const double p = std::pow(2.0, model.beta);
  return 6.0 * model.gamma * std::pow(n, model.beta) / (p * (p - 4.0)) +
         1.5 * n * n * (1.0 - model.gamma / (p - 4.0));
}

/// Shorter closed form for C:
///   6 gamma (2^beta - 3)(n^beta - 2n / 2^beta) / ((2^beta - 4)(2^beta - 2)).
/// It drops the n^2 part of Cp.
inline double short_form_c(double n, const ComplexityModel& model) {
  model.validate();
  const double p = std::pow(2.0, model.beta);
  return 6.0 * model.gamma * (p - 3.0) * (std::pow(n, model.beta) - 2.0 * n / p) / ((p - 4.0) * (p - 2.0));
}

struct CountedCost {
  std::uint64_t scalar_ops = 0;
  std::uint64_t block_muls = 0;  // products issued by QP levels
};

/// Instrumented parallelogram cancellation for an n-row input (leaf order 1,
/// standard multiply, so M(n) = 2 n^3 exactly).
inline CountedCost counted_cp(std::size_t n, std::uint64_t seed = 1) {
  detail::require_complexity_order(static_cast<double>(n));
  MatrixGenerator gen(seed);
  const std::size_t half = n / 2;
  auto top = gen.dense<double>(half, half);
  auto bottom = gen.upper_triangular<double>(half);
  // Nonzero entries keep every rotation non-trivial.
  for (auto& v : top.data())
    if (v == 0.0) v = 1.0;
  for (std::size_t i = 0; i < half; ++i)
    for (std::size_t j = i; j < half; ++j)
      if (bottom(i, j) == 0.0) bottom(i, j) = 1.0;
  KernelConfig cfg;
  cfg.leaf_size = 1;
  cfg.class_tag = AlgorithmClass::MA2;
  OpCounter ctr;
  qp_decompose(vstack(top, bottom), cfg, ctr);
  return {ctr.scalar_ops(), ctr.qp_block_muls()};
}

/// Instrumented three-stage QR of a random n x n input (leaf order 1).
inline CountedCost counted_c(std::size_t n, std::uint64_t seed = 1) {
  detail::require_complexity_order(static_cast<double>(n));
  MatrixGenerator gen(seed);
  auto m = gen.dense<double>(n, n);
  for (auto& v : m.data())
    if (v == 0.0) v = 1.0;
  KernelConfig cfg;
  cfg.leaf_size = 1;
  cfg.class_tag = AlgorithmClass::MA2;
  auto res = qr_g(m, cfg);
  return {res.counter.scalar_ops(), res.counter.qp_block_muls()};
}

}  // namespace rma
