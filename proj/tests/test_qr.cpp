#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "rma/complexity.hpp"
#include "rma/qr.hpp"
#include "rma/random.hpp"

using namespace rma;

TEST(Givens, ThreeFourFive) {
  auto r = givens2(3.0, 4.0);
  EXPECT_DOUBLE_EQ(r.g.c, 0.6);
  EXPECT_DOUBLE_EQ(r.g.s, 0.8);
  EXPECT_DOUBLE_EQ(r.a, 5.0);
}

TEST(Givens, NothingToCancel) {
  auto r = givens2(-7.0, 0.0);
  EXPECT_EQ(r.g.c, 1.0);
  EXPECT_EQ(r.g.s, 0.0);
  EXPECT_EQ(r.a, -7.0);
}

TEST(Givens, UnitNormAndCancellation) {
  MatrixGenerator g(9);
  for (int k = 0; k < 200; ++k) {
    const double a = double(g.small_int(-1000, 1000)) / 7.0;
    const double b = double(g.small_int(-1000, 1000)) / 3.0;
    auto r = givens2(a, b);
    EXPECT_NEAR(r.g.c * r.g.c + r.g.s * r.g.s, 1.0, 1e-12);
    EXPECT_LE(std::abs(r.g.c * b - r.g.s * a), 1e-10 * std::sqrt(a * a + b * b));
  }
}

TEST(Givens, ApplyZeroesTheLowerEntry) {
  Matrix<double> m{{3, 1}, {4, 2}};
  auto out = apply_givens_rows(m, 0, givens2(3.0, 4.0).g, 0);
  EXPECT_EQ(out(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(out(0, 0), 5.0);
  try {
    apply_givens_rows(m, 1, GivensPair{1, 0}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidIndex);
  }
}

TEST(QrSequential, PropertiesAndOracleAgreement) {
  for (std::size_t n : {2, 5, 16, 64}) {
    MatrixGenerator g(n + 3);
    auto a = g.square<double>(n);
    auto r = qr_sequential(a);
    EXPECT_TRUE(oracle::strictly_lower_zero(r.r));
    EXPECT_LE(oracle::fro(oracle::product(oracle::transpose(r.q), r.q), oracle::eye<double>(n)), 1e-10);
    EXPECT_LE(oracle::fro(oracle::product(r.q, r.r), a), 1e-9 * oracle::fro(a));
    auto [oq, orr] = oracle::givens_qr(a);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(std::abs(r.r(i, i)), std::abs(orr(i, i)), 1e-8 * std::abs(orr(i, i)) + 1e-12);
  }
}

TEST(QrSequential, RationalsAreUnsupported) {
  try {
    qr_sequential(oracle::eye<Rational>(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnsupportedScalar);
  }
}

TEST(Qp, IdentityOverZeroIsUntouched) {
  OpCounter ctr;
  auto r = qp_decompose(vstack(oracle::eye<double>(4), Matrix<double>(4, 4)), KernelConfig{1}, ctr);
  EXPECT_TRUE(bitwise_equal(r.q, oracle::eye<double>(8)));
  EXPECT_TRUE(bitwise_equal(r.p_top, oracle::eye<double>(4)));
}

TEST(Qp, SingleColumn) {
  OpCounter ctr;
  auto r = qp_decompose(Matrix<double>{{3}, {4}}, KernelConfig{1}, ctr);
  EXPECT_DOUBLE_EQ(r.p_top(0, 0), 5.0);
  auto applied = oracle::product(r.q, Matrix<double>{{3}, {4}});
  EXPECT_DOUBLE_EQ(applied(0, 0), 5.0);
  EXPECT_NEAR(applied(1, 0), 0.0, 1e-15);
}

TEST(Qp, AnnihilatesParallelogram) {
  for (std::size_t n : {2, 4, 8, 16}) {
    MatrixGenerator g(n * 7);
    auto m = vstack(g.square<double>(n), g.upper_triangular<double>(n));
    OpCounter ctr;
    auto r = qp_decompose(m, KernelConfig{1}, ctr);
    auto applied = oracle::product(r.q, m);
    EXPECT_LE(oracle::fro(applied.block(n, 0, n, n)), 1e-10 * oracle::fro(m));
    EXPECT_LE(oracle::fro(applied.block(0, 0, n, n), r.p_top), 1e-10 * oracle::fro(m));
    EXPECT_TRUE(oracle::strictly_lower_zero(r.p_top));
    EXPECT_LE(oracle::fro(oracle::product(oracle::transpose(r.q), r.q), oracle::eye<double>(2 * n)), 1e-10);
  }
}

TEST(Qp, LowerBlockMustBeUpperTriangular) {
  OpCounter ctr;
  try {
    qp_decompose(Matrix<double>{{1, 0}, {0, 1}, {1, 0}, {1, 1}}, KernelConfig{1}, ctr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::PreconditionViolated);
  }
}

TEST(Qp, EachLevelIssuesTwentyEightProducts) {
  // Eight products update the data blocks and twenty assemble the factor.
  std::uint64_t prev = counted_cp(2).block_muls;
  EXPECT_EQ(prev, 0u);
  for (std::size_t n : {4, 8, 16, 32}) {
    auto now = counted_cp(n).block_muls;
    EXPECT_EQ(now, 4 * prev + 28) << n;
    prev = now;
  }
}

TEST(QrG, IdentityStaysIdentity) {
  auto r = qr_g(oracle::eye<double>(8), KernelConfig{2});
  EXPECT_TRUE(bitwise_equal(r.q, oracle::eye<double>(8)));
  EXPECT_TRUE(bitwise_equal(r.r, oracle::eye<double>(8)));
}

TEST(QrG, LeafOrderDelegatesToSequential) {
  MatrixGenerator g(4);
  auto a = g.square<double>(2);
  auto x = qr_g(a, KernelConfig{2});
  auto y = qr_sequential(a);
  EXPECT_TRUE(bitwise_equal(x.q, y.q));
  EXPECT_TRUE(bitwise_equal(x.r, y.r));
}

TEST(QrG, PropertiesAcrossOrdersAndLeaves) {
  for (std::size_t n : {4, 16, 64})
    for (std::size_t leaf : {1, 4})
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        MatrixGenerator g(seed * 31 + n);
        auto a = g.square<double>(n);
        auto r = qr_g(a, KernelConfig{leaf});
        EXPECT_TRUE(oracle::strictly_lower_zero(r.r));
        EXPECT_LE(oracle::fro(oracle::product(oracle::transpose(r.q), r.q), oracle::eye<double>(n)), 1e-10);
        EXPECT_LE(oracle::fro(oracle::product(r.q, r.r), a), 1e-9 * oracle::fro(a));
        auto s = qr_sequential(a);
        for (std::size_t i = 0; i < n; ++i)
          EXPECT_NEAR(std::abs(r.r(i, i)), std::abs(s.r(i, i)), 1e-8 * std::abs(s.r(i, i)));
      }
}

TEST(QrG, RejectsNonPowerOfTwo) {
  try {
    qr_g(Matrix<double>(6, 6), KernelConfig{2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidShape);
  }
}

TEST(Complexity, PredictedFormsSolveTheirRecurrences) {
  ComplexityModel m{2.0, 3.0};
  auto M = [&](double k) { return m.multiply_cost(k); };
  for (double n = 2; n <= 256; n *= 2) {
    const double lhs = predicted_cp(2 * n, m), rhs = 4 * predicted_cp(n, m) + 24 * M(n / 2);
    EXPECT_LE(std::abs(lhs - rhs), 1e-9 * std::abs(lhs)) << n;
    const double c = predicted_c(2 * n, m);
    const double c_rhs = 2 * predicted_c(n, m) + predicted_cp(2 * n, m) + 6 * M(n);
    EXPECT_LE(std::abs(c - c_rhs), 1e-9 * std::abs(c)) << n;
  }
  EXPECT_DOUBLE_EQ(predicted_cp(2, m), 6.0);
}

TEST(Complexity, ShortFormsSolveASixProductRecurrence) {
  ComplexityModel m{2.0, 3.0};
  for (double n = 2; n <= 64; n *= 2) {
    const double lhs = short_form_cp(2 * n, m);
    EXPECT_NEAR(lhs, 4 * short_form_cp(n, m) + 6 * m.multiply_cost(n / 2), 1e-9 * lhs);
    EXPECT_GT(std::abs(lhs - (4 * short_form_cp(n, m) + 24 * m.multiply_cost(n / 2))), 1.0);
  }
}

TEST(Complexity, AsymptoticGrowth) {
  ComplexityModel m{2.0, 3.0};
  EXPECT_NEAR(predicted_cp(256, m) / predicted_cp(128, m), 8.0, 0.8);
  // Doubling the order multiplies the count by a factor falling toward 8.
  double prev_ratio = 9.0;
  for (std::size_t n : {8, 16, 32, 64}) {
    const double ratio = double(counted_cp(2 * n).scalar_ops) / double(counted_cp(n).scalar_ops);
    EXPECT_LT(ratio, prev_ratio) << n;
    EXPECT_GT(ratio, 8.0) << n;
    prev_ratio = ratio;
  }
  EXPECT_LT(prev_ratio, 8.1);
}

TEST(Complexity, ModelValidation) {
  for (double beta : {1.0, 2.0}) {
    try {
      predicted_cp(4, ComplexityModel{2.0, beta});
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::ModelSingular);
    }
  }
  try {
    predicted_c(6, ComplexityModel{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::PreconditionViolated);
  }
}
