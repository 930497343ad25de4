#include <cmath>

#include <gtest/gtest.h>

#include "bsbloch/ensemble.hpp"
#include "bsbloch/potential.hpp"

using namespace bsbloch;

namespace {

Mat<real> one(double x) { return Mat<real>::Constant(1, 1, x); }

// Two-state basis with pairs (r, s) and (t, u); element (0, 1) carries W = 1.
EnergyDependentPotential single_node(Orbital r, Orbital s, Orbital t, Orbital u, double gamma = 0.0) {
  PhotonKernel k;
  k.grid = QuadratureGrid{{1.0}, {1.0}};
  k.coupling = Mat<real>::Zero(2, 2);
  k.coupling(0, 1) = 1.0;
  k.gamma = gamma;
  k.pairs = {OrbitalPair{r, s}, OrbitalPair{t, u}};
  return EnergyDependentPotential(2, {PhotonTerm{k}});
}

EnergyDependentPotential mixed_potential() {
  const auto inst = quasi_degenerate(0.01, 0.2);
  return inst.potential;
}

}  // namespace

TEST(Evaluate, ConstantIsEnergyIndependent) {
  Mat<real> w(2, 2);
  w << 1, 2, 3, 4;
  const EnergyDependentPotential v(2, {ConstantTerm{w}});
  EXPECT_EQ(evaluate<real>(v, -3.0), w);
  EXPECT_EQ(evaluate<real>(v, 7.5), w);
  EXPECT_TRUE(v.energy_independent());
  EXPECT_TRUE(derivative<real>(v, 0.2, 1).isZero(0.0));
}

TEST(Evaluate, PhotonHandValues) {
  const Orbital z = make_orbital(0, 0.0);
  EXPECT_NEAR(evaluate<real>(single_node(z, z, z, z), 0.0)(0, 1), -2.0, 1e-15);

  const auto v = single_node(make_orbital(0, 0.1), make_orbital(1, 0.3), make_orbital(2, 0.4),
                             make_orbital(3, 0.2));
  EXPECT_NEAR(evaluate<real>(v, 0.5)(0, 1), 1 / -0.8 + 1 / -1.2, 1e-15);
  EXPECT_NEAR(evaluate<real>(v, 0.5)(0, 1), -2.0833333333333333, 1e-15);

  const auto h = single_node(make_orbital(0, -1.0), make_orbital(1, 0.2), make_orbital(2, 0.2),
                             make_orbital(3, 0.5));
  EXPECT_NEAR(evaluate<real>(h, 0.0)(0, 1), 1 / 1.5 - 1 / 1.4, 1e-15);
}

TEST(Evaluate, PhotonDampingShiftsPoles) {
  const Orbital z = make_orbital(0, 0.0);
  const auto v = single_node(z, z, z, z, 0.1);
  EXPECT_TRUE(v.needs_complex());
  const cplx got = evaluate<cplx>(v, cplx(0.0))(0, 1);
  EXPECT_NEAR(std::abs(got - 2.0 / cplx(-1.0, 0.1)), 0.0, 1e-15);
}

TEST(Derivative, HandValues) {
  const EnergyDependentPotential r(1, {RationalTerm{one(1.0), -2.0, 1}});
  EXPECT_NEAR(derivative<real>(r, 0.0, 1)(0, 0), -0.25, 1e-16);
  EXPECT_NEAR(derivative<real>(r, 0.0, 2)(0, 0), 0.25, 1e-16);
  const Orbital z = make_orbital(0, 0.0);
  EXPECT_NEAR(derivative<real>(single_node(z, z, z, z), 0.0, 1)(0, 1), -2.0, 1e-15);
}

TEST(Derivative, MatchesFiniteDifferences) {
  const auto v = mixed_potential();
  const double e = 0.3, h = 1e-4;
  auto at = [&](double x) { return evaluate<real>(v, x); };
  const Mat<real> d1 = (at(e + h) - at(e - h)) / (2 * h);
  const Mat<real> d2 = (at(e + h) - 2 * at(e) + at(e - h)) / (h * h);
  EXPECT_LT(max_abs(derivative<real>(v, e, 1) - d1), 1e-7);
  EXPECT_LT(max_abs(derivative<real>(v, e, 2) - d2), 1e-5);
  const Mat<real> d3 = (derivative<real>(v, e + h, 2) - derivative<real>(v, e - h, 2)) / (2 * h);
  EXPECT_LT(max_abs(derivative<real>(v, e, 3) - d3), 1e-5);
}

TEST(Derivative, TaylorCoefficients) {
  const auto v = mixed_potential();
  const auto jet = taylor<real>(v, 0.2, 3);
  ASSERT_EQ(jet.size(), 4u);
  EXPECT_EQ(jet[0], evaluate<real>(v, 0.2));
  EXPECT_LT(max_abs(jet[2] - derivative<real>(v, 0.2, 2) / 2.0), 1e-15);
  EXPECT_LT(max_abs(jet[3] - derivative<real>(v, 0.2, 3) / 6.0), 1e-15);
}

TEST(Potential, Linearity) {
  const auto v = mixed_potential();
  const auto v2 = v.scaled(2.5);
  EXPECT_LT(max_abs(evaluate<real>(v2, 0.1) - 2.5 * evaluate<real>(v, 0.1)), 1e-14);
  EXPECT_LT(max_abs(derivative<real>(v2, 0.1, 2) - 2.5 * derivative<real>(v, 0.1, 2)), 1e-13);

  EnergyDependentPotential sum = v;
  for (const auto& t : v.terms()) sum.add(t);
  EXPECT_LT(max_abs(evaluate<real>(sum, 0.1) - 2.0 * evaluate<real>(v, 0.1)), 1e-14);
}

TEST(Potential, RejectsWrongShape) {
  EnergyDependentPotential v(2);
  EXPECT_THROW(v.add(ConstantTerm{Mat<real>::Zero(3, 3)}), Error);
}

TEST(ApplyFunction, DegenerateHeffIsPlainEvaluation) {
  const auto v = mixed_potential();
  const Mat<real> b = Mat<real>::Random(4, 2);
  const Mat<real> heff = 0.15 * Mat<real>::Identity(2, 2);
  EXPECT_LT(max_abs(apply_function_of_heff<real>(v, heff, b) - evaluate<real>(v, 0.15) * b), 1e-14);
}

TEST(ApplyFunction, ScalarFixedPoint) {
  const EnergyDependentPotential v(1, {RationalTerm{one(1.0), -2.0, 1}});
  const double e = -1 + std::sqrt(1.5);
  const Mat<real> out = apply_function_of_heff<real>(v, one(e), one(1.0));
  EXPECT_NEAR(out(0, 0), 1 / (2 + e), 1e-15);
  EXPECT_NEAR(out(0, 0), 0.4494897427831781, 1e-15);
}

TEST(ApplyFunction, ConstantIgnoresHeff) {
  Mat<real> w = Mat<real>::Random(3, 3);
  const EnergyDependentPotential v(3, {ConstantTerm{w}});
  Mat<real> heff(2, 2);
  heff << 0.1, 0.3, 0.2, 0.5;
  const Mat<real> b = Mat<real>::Random(3, 2);
  EXPECT_LT(max_abs(apply_function_of_heff<real>(v, heff, b) - w * b), 1e-14);
}

TEST(ApplyFunction, SimplePoleIsMatrixInverse) {
  // sum_a W B r_a l_a / (E_a - c) = W B (H - c)^-1 for any diagonalizable H.
  Mat<real> w = Mat<real>::Random(3, 3);
  const double c = -2.0;
  const EnergyDependentPotential v(3, {RationalTerm{w, c, 1}});
  Mat<real> heff(2, 2);
  heff << 0.1, 0.3, -0.2, 0.5;  // complex pair; use the complex path
  const Mat<cplx> hc = heff.cast<cplx>();
  const Mat<cplx> b = Mat<real>::Random(3, 2).cast<cplx>();
  const Mat<cplx> expect = w.cast<cplx>() * b * (hc - cplx(c) * Mat<cplx>::Identity(2, 2)).inverse();
  EXPECT_LT(max_abs(Mat<cplx>(apply_function_of_heff<cplx>(v, hc, b) - expect)), 1e-13);
  // Squared pole, first derivative: d/dE (E - c)^-2 = -2 (E - c)^-3.
  const EnergyDependentPotential v2(3, {RationalTerm{w, c, 2}});
  const Mat<cplx> inv = (hc - cplx(c) * Mat<cplx>::Identity(2, 2)).inverse();
  const Mat<cplx> expect2 = -2.0 * w.cast<cplx>() * b * inv * inv * inv;
  EXPECT_LT(max_abs(Mat<cplx>(apply_function_of_heff<cplx>(v2, hc, b, 1) - expect2)), 1e-12);
}

TEST(ApplyFunction, InvariantUnderSimilarity) {
  // V(S H S^-1) (B S^-1) = V(H) B S^-1.
  const auto v = mixed_potential();
  Mat<real> heff(2, 2);
  heff << 0.05, 0.02, 0.01, 0.12;
  Mat<real> s(2, 2);
  s << 2.0, 0.3, -0.1, 0.7;
  const Mat<real> si = s.inverse();
  const Mat<real> b = Mat<real>::Random(4, 2);
  const Mat<real> lhs = apply_function_of_heff<real>(v, Mat<real>(s * heff * si), Mat<real>(b * si));
  const Mat<real> rhs = apply_function_of_heff<real>(v, heff, b) * si;
  EXPECT_LT(max_abs(lhs - rhs), 1e-13);
}
