#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "bsbloch/diffratio.hpp"
#include "oracles.hpp"

using namespace bsbloch;

namespace {

DifferentiableFunction<double, double> power(int p) {
  return {[p](double x) { return std::pow(x, p); },
          [p](double x, int n) {
            if (n > p) return 0.0;
            double c = 1.0;
            for (int k = 0; k < n; ++k) c *= p - k;
            return c * std::pow(x, p - n);
          }};
}

DifferentiableFunction<double, double> exponential() {
  return {[](double x) { return std::exp(x); }, [](double x, int) { return std::exp(x); }};
}

}  // namespace

TEST(DiffRatio, Examples) {
  EXPECT_DOUBLE_EQ(diff_ratio(power(2), SamplePoints<double>{1.0, {2.0}}, 1), 3.0);
  EXPECT_NEAR(diff_ratio(power(2), SamplePoints<double>{0.3, {-1.7, 2.9}}, 2), 1.0, 1e-14);
  EXPECT_DOUBLE_EQ(diff_ratio(power(3), SamplePoints<double>{0.0, {1.0, 2.0, 3.0}}, 3), 1.0);
}

TEST(DiffRatio, MatchesRecursiveDefinition) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  const auto f = exponential();
  for (int n = 1; n <= 4; ++n) {
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> x;
      for (int k = 0; k <= n; ++k) x.push_back(u(rng));
      const double want = oracle::divided_difference([](double t) { return std::exp(t); }, x);
      const double got = diff_ratio(f, SamplePoints<double>{x[0], {x.begin() + 1, x.end()}}, n);
      EXPECT_NEAR(got, want, 1e-9) << n;
    }
  }
}

TEST(DiffRatio, SymmetricInItsPoints) {
  const auto f = exponential();
  std::vector<double> x{0.1, 0.7, -0.4, 0.25, 1.1};
  const double ref = diff_ratio(f, SamplePoints<double>{x[0], {x.begin() + 1, x.end()}}, 4);
  std::sort(x.begin(), x.end());
  do {
    const double v = diff_ratio(f, SamplePoints<double>{x[0], {x.begin() + 1, x.end()}}, 4);
    EXPECT_NEAR(v, ref, 1e-12);
  } while (std::next_permutation(x.begin(), x.end()));
}

TEST(DiffRatio, CoincidentPointsUseDerivatives) {
  const auto f = exponential();
  EXPECT_NEAR(diff_ratio(f, SamplePoints<double>{0.5, {0.5}}, 1), std::exp(0.5), 1e-15);
  EXPECT_NEAR(diff_ratio(f, SamplePoints<double>{0.5, {0.5, 0.5}}, 2), std::exp(0.5) / 2, 1e-15);
  // x^4 over (a, a, b, b): for a monomial the n-th ratio is the complete
  // homogeneous polynomial of degree p - n, here a + a + b + b.
  EXPECT_DOUBLE_EQ(diff_ratio(power(4), SamplePoints<double>{0.5, {0.5, 1.5, 1.5}}, 3), 4.0);
  // A mixed repeated point agrees with the limit of nearby distinct points.
  const double confluent = diff_ratio(f, SamplePoints<double>{0.2, {0.2, 0.9}}, 2);
  const double near = oracle::divided_difference([](double t) { return std::exp(t); }, {0.2, 0.2 + 1e-5, 0.9});
  EXPECT_NEAR(confluent, near, 1e-5);
}

TEST(DiffRatio, CoincidentWithoutDerivative) {
  DifferentiableFunction<double, double> f{[](double x) { return x * x; }, {}};
  EXPECT_DOUBLE_EQ(diff_ratio(f, SamplePoints<double>{1.0, {3.0}}, 1), 4.0);
  try {
    diff_ratio(f, SamplePoints<double>{1.0, {1.0}}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CoincidentWithoutDerivative);
  }
}

TEST(DiffRatio, OrderOutOfRange) {
  EXPECT_THROW(diff_ratio(power(2), SamplePoints<double>{0.0, {1, 2, 3, 4, 5}}, 5), Error);
  EXPECT_THROW(diff_ratio(power(2), SamplePoints<double>{0.0, {1}}, 2), Error);
}

TEST(DiffRatio, MatrixValued) {
  using M = Mat<real>;
  DifferentiableFunction<M, double> f{
      [](double x) {
        M m(2, 2);
        m << x * x, std::exp(x), 1.0, x * x * x;
        return m;
      },
      [](double x, int n) {
        M m(2, 2);
        m << (n == 1 ? 2 * x : n == 2 ? 2.0 : 0.0), std::exp(x), 0.0,
            (n == 1 ? 3 * x * x : n == 2 ? 6 * x : n == 3 ? 6.0 : 0.0);
        return m;
      }};
  const M r = diff_ratio(f, SamplePoints<double>{0.0, {1.0, 2.0, 3.0}}, 3);
  EXPECT_NEAR(r(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(r(1, 0), 0.0, 1e-15);
  EXPECT_NEAR(r(1, 1), 1.0, 1e-15);
  EXPECT_NEAR(r(0, 1), oracle::divided_difference([](double t) { return std::exp(t); }, {0, 1, 2, 3}), 1e-14);
}

TEST(TaylorLimit, LinearConvergence) {
  const auto f = exponential();
  EXPECT_NEAR(taylor_limit_check(f, 0.0, 1, 1e-4), 0.5e-4, 1e-8);
  for (int n = 1; n <= 4; ++n) {
    const double h = 1e-2;
    const double r = taylor_limit_check(f, 0.0, n, h) / taylor_limit_check(f, 0.0, n, h / 2);
    EXPECT_NEAR(r, 2.0, 0.2) << n;
  }
}

TEST(TaylorLimit, LowDegreePolynomialsAreExact) {
  // Dyadic spreads keep every sample point and power exact in binary.
  for (int n = 1; n <= 4; ++n)
    for (int p = 0; p < n; ++p) {
      EXPECT_EQ(taylor_limit_check(power(p), 0.25, n, 0x1p-3), 0.0);
      EXPECT_EQ(taylor_limit_check(power(p), 0.25, n, 0x1p-10), 0.0);
    }
}

TEST(DiffRatio, ComplexPoints) {
  DifferentiableFunction<cplx, cplx> f{[](cplx x) { return x * x; },
                                       [](cplx x, int n) { return n == 1 ? 2.0 * x : cplx(n == 2 ? 2.0 : 0.0); }};
  const cplx r = diff_ratio(f, SamplePoints<cplx>{cplx(0, 1), {cplx(1, 0)}}, 1);
  EXPECT_NEAR(std::abs(r - cplx(1, 1)), 0.0, 1e-15);
  const cplx c = diff_ratio(f, SamplePoints<cplx>{cplx(0, 1), {cplx(0, 1)}}, 1);
  EXPECT_NEAR(std::abs(c - cplx(0, 2)), 0.0, 1e-15);
}
