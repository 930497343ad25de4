#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "bsbloch/numerics.hpp"
#include "oracles.hpp"

using namespace bsbloch;

TEST(Eig, IdentityKeepsBasis) {
  const auto es = eig_general<real>(Mat<real>::Identity(2, 2));
  EXPECT_DOUBLE_EQ(es.values(0), 1.0);
  EXPECT_DOUBLE_EQ(es.values(1), 1.0);
  EXPECT_LT((es.right.cwiseAbs() - Mat<real>::Identity(2, 2)).norm(), 1e-15);
}

TEST(Eig, DiagonalSortedAscending) {
  Mat<real> m(2, 2);
  m << 3, 0, 0, 1;
  const auto es = eig_general<real>(m);
  EXPECT_DOUBLE_EQ(es.values(0), 1.0);
  EXPECT_DOUBLE_EQ(es.values(1), 3.0);
}

TEST(Eig, TwoByTwoMatchesQuadratic) {
  Mat<real> m(2, 2);
  m << 0, 0.1, 0.1, 1;
  const auto es = eig_general<real>(m);
  // det(E - M) = E^2 - E - 0.01
  const auto [lo, hi] = oracle::quadratic_roots(-1.0, -0.01);
  EXPECT_NEAR(es.values(0), lo, 1e-15);
  EXPECT_NEAR(es.values(1), hi, 1e-15);
  EXPECT_NEAR(lo, (1 - std::sqrt(1.04)) / 2, 1e-16);
}

TEST(Eig, BiorthonormalAndReconstructs) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 5;
    Mat<cplx> m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = cplx(u(rng), u(rng));
    const auto es = eig_general<cplx>(m);
    EXPECT_LT((es.left * es.right - Mat<cplx>::Identity(n, n)).norm(), 1e-10);
    EXPECT_LT((es.right * es.values.asDiagonal() * es.left - m).norm(), 1e-10);
    for (int k = 0; k < n; ++k) EXPECT_NEAR(es.right.col(k).norm(), 1.0, 1e-12);
    for (int k = 1; k < n; ++k) EXPECT_LE(es.values(k - 1).real(), es.values(k).real());
  }
}

TEST(Eig, JordanBlockIsDefective) {
  Mat<real> m(2, 2);
  m << 1, 1, 0, 1;
  try {
    eig_general<real>(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Defective);
  }
}

TEST(Eig, RotationHasComplexSpectrum) {
  Mat<real> m(2, 2);
  m << 0, -1, 1, 0;
  try {
    eig_general<real>(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ComplexSpectrum);
  }
  const auto es = eig_general<cplx>(m.cast<cplx>());
  EXPECT_NEAR(std::abs(es.values(0) - cplx(0, -1)), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(es.values(1) - cplx(0, 1)), 0.0, 1e-14);
}

TEST(SolveLinear, Examples) {
  Mat<real> b = Mat<real>::Random(3, 2);
  EXPECT_EQ(solve_linear<real>(Mat<real>::Identity(3, 3), b), b);

  Mat<real> a(2, 2), rhs(2, 1);
  a << 2, 0, 0, 4;
  rhs << 2, 4;
  const Mat<real> x = solve_linear<real>(a, rhs);
  EXPECT_NEAR(x(0), 1.0, 1e-15);
  EXPECT_NEAR(x(1), 1.0, 1e-15);

  a << 1, 0.5, 0, 1;
  rhs << 1, 1;
  const Mat<real> y = solve_linear<real>(a, rhs);
  EXPECT_NEAR(y(0), 0.5, 1e-15);
  EXPECT_NEAR(y(1), 1.0, 1e-15);
}

TEST(SolveLinear, ResidualSmall) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int n : {1, 3, 8, 20}) {
    Mat<real> a(n, n), b(n, 3);
    for (auto& x : a.reshaped()) x = g(rng);
    for (auto& x : b.reshaped()) x = g(rng);
    a += 3.0 * Mat<real>::Identity(n, n);
    const Mat<real> x = solve_linear<real>(a, b);
    EXPECT_LT((a * x - b).norm(), 1e-10 * b.norm());
  }
}

TEST(SolveLinear, SingularRejected) {
  Mat<real> a(2, 2), b(2, 1);
  a << 1, 2, 2, 4;
  b << 1, 1;
  try {
    solve_linear<real>(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Singular);
  }
}

TEST(GaussLegendre, OnePointIsMidpoint) {
  const auto q = gauss_legendre(1, 0.0, 2.0);
  ASSERT_EQ(q.size(), 1u);
  EXPECT_DOUBLE_EQ(q.nodes[0], 1.0);
  EXPECT_DOUBLE_EQ(q.weights[0], 2.0);
}

TEST(GaussLegendre, TwoPointNodes) {
  const auto q = gauss_legendre(2, -1.0, 1.0);
  EXPECT_NEAR(q.nodes[0], -1.0 / std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(q.nodes[1], 1.0 / std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(q.weights[0], 1.0, 1e-15);
  EXPECT_NEAR(q.weights[1], 1.0, 1e-15);
}

TEST(GaussLegendre, PolynomialExactness) {
  const auto q2 = gauss_legendre(2, 0.0, 1.0);
  double s = 0;
  for (std::size_t i = 0; i < q2.size(); ++i) s += q2.weights[i] * q2.nodes[i] * q2.nodes[i];
  EXPECT_NEAR(s, 1.0 / 3.0, 1e-15);
  // n points integrate degree 2n - 1 exactly.
  for (int n = 1; n <= 12; ++n) {
    const auto q = gauss_legendre(n, 0.5, 2.0);
    const int deg = 2 * n - 1;
    double sum = 0;
    for (std::size_t i = 0; i < q.size(); ++i) sum += q.weights[i] * std::pow(q.nodes[i], deg);
    const double exact = (std::pow(2.0, deg + 1) - std::pow(0.5, deg + 1)) / (deg + 1);
    EXPECT_NEAR(sum, exact, 1e-12 * exact) << n;
  }
}

TEST(GaussLegendre, ExponentialOnLongInterval) {
  const auto q = gauss_legendre(20, 0.0, 10.0);
  double s = 0;
  for (std::size_t i = 0; i < q.size(); ++i) s += q.weights[i] * std::exp(-q.nodes[i]);
  EXPECT_NEAR(s, 1.0 - std::exp(-10.0), 1e-12);
  for (std::size_t i = 1; i < q.size(); ++i) EXPECT_LT(q.nodes[i - 1], q.nodes[i]);
  for (double w : q.weights) EXPECT_GT(w, 0.0);
}

TEST(GaussLegendre, BadRange) {
  try {
    gauss_legendre(4, 1.0, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BadRange);
  }
}
