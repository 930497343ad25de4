#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "bsbloch/allorder.hpp"
#include "bsbloch/ensemble.hpp"
#include "oracles.hpp"

using namespace bsbloch;

namespace {

const double kToyA = (1 - std::sqrt(1.04)) / 2;
const double kToyB = -1 + std::sqrt(1.5);

std::vector<int> as_int(const std::vector<std::size_t>& p) { return {p.begin(), p.end()}; }

std::function<oracle::Matrix(double)> full_matrix(const Spectrum& s, const EnergyDependentPotential& v) {
  return [&s, &v](double e) {
    return oracle::Matrix(h0_matrix<real>(s) + evaluate<real>(v, e));
  };
}

double distance_to(const std::vector<double>& roots, double e) {
  double best = 1e300;
  for (double r : roots) best = std::min(best, std::abs(r - e));
  return best;
}

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Invalid;
}

}  // namespace

TEST(OmegaBar, ZeroPotentialIsInjection) {
  const auto s = diagonal_spectrum({0.0, 0.2, 1.0});
  const auto P = make_model_space(s, {1, 0});
  const auto w = omega_bar<real>(s, P, EnergyDependentPotential(3), 0.1);
  EXPECT_EQ(w.block, model_injection<real>(s, P));
}

TEST(OmegaBar, ToyAAmplitudeIsEigenvectorRatio) {
  const auto t = toy_a();
  const auto w = omega_bar<real>(t.spectrum, t.model, t.potential, kToyA);
  EXPECT_EQ(w.block(0, 0), 1.0);
  EXPECT_NEAR(w.block(1, 0), 0.1 / (kToyA - 1), 1e-15);
  EXPECT_NEAR(w.block(1, 0), kToyA / 0.1, 1e-14);
}

TEST(OmegaBar, SumsTheResolventSeries) {
  const auto t = toy_c();
  const Mat<real> v = evaluate<real>(t.potential, 0.0);
  for (double e : {-0.05, 0.003, 0.2}) {
    const auto w = omega_bar<real>(t.spectrum, t.model, t.potential, e);
    const auto ref = oracle::omega_bar_series(t.spectrum.h0, as_int(t.model.p), v, e, 80);
    EXPECT_LT(max_abs(w.block - ref), 1e-14) << e;
  }
}

TEST(HeffBar, Examples) {
  const auto b = toy_b();
  EXPECT_DOUBLE_EQ(heff_bar<real>(b.spectrum, b.model, b.potential, 0.0)(0, 0), 0.25);
  const auto a = toy_a();
  EXPECT_NEAR(heff_bar<real>(a.spectrum, a.model, a.potential, 0.0)(0, 0), -0.01, 1e-17);

  const auto s = diagonal_spectrum({0.0, 0.5, 1.0});
  const auto P = make_model_space(s, {0, 1, 2});
  Mat<real> w(3, 3);
  w << 0.1, 0.2, 0.0, 0.2, -0.3, 0.05, 0.0, 0.05, 0.4;
  EXPECT_EQ(heff_bar<real>(s, P, EnergyDependentPotential(3, {ConstantTerm{w}}), 0.7), w);
}

TEST(SolveBsState, ToyB) {
  const auto t = toy_b();
  const auto r = solve_bs_state(t.spectrum, t.model, t.potential, 0, -0.5, 0.5);
  EXPECT_NEAR(r.energy, kToyB, 1e-14);
  EXPECT_NEAR(r.energy, 0.2247448714, 1e-10);
  EXPECT_LT(r.residual, 1e-13);
}

TEST(SolveBsState, ToyAWaveColumn) {
  const auto t = toy_a();
  const int b = branch_for_model_state(t.spectrum, t.model, t.potential, 0, 0.0);
  EXPECT_EQ(b, 0);
  const auto r = solve_bs_state(t.spectrum, t.model, t.potential, b, -0.5, 0.5);
  EXPECT_NEAR(r.energy, kToyA, 1e-15);
  // Exact eigenvector of the 2 x 2 block, scaled to unit model component.
  EXPECT_NEAR(r.wave_column(0), 1.0, 1e-15);
  EXPECT_NEAR(r.wave_column(1), kToyA / 0.1, 1e-13);
  EXPECT_EQ(r.wave_column(2), 0.0);
}

TEST(SolveBsState, ZeroPotential) {
  const auto s = diagonal_spectrum({0.3, 1.0});
  const auto P = make_model_space(s, {0});
  const auto r = solve_bs_state(s, P, EnergyDependentPotential(2), 0, 0.0, 0.6);
  EXPECT_DOUBLE_EQ(r.energy, 0.3);
}

TEST(SolveBsState, Errors) {
  const auto t = toy_b();
  EXPECT_EQ(kind_of([&] { solve_bs_state(t.spectrum, t.model, t.potential, 0, 0.5, 0.5); }), ErrorKind::BadRange);
  EXPECT_EQ(kind_of([&] { solve_bs_state(t.spectrum, t.model, t.potential, 0, 0.5, 1.0); }), ErrorKind::NoRoot);
  EXPECT_EQ(kind_of([&] { solve_bs_state(t.spectrum, t.model, t.potential, 3, -0.5, 0.5); }), ErrorKind::Invalid);
}

TEST(BsBloch, ZeroPotentialConvergesInOneStep) {
  const auto s = diagonal_spectrum({0.0, 0.01, 1.0});
  const auto P = make_model_space(s, {0, 1});
  const auto st = bs_bloch_solve<real>(s, P, EnergyDependentPotential(3));
  EXPECT_EQ(st.iterations, 1);
  EXPECT_EQ(st.heff.matrix(), model_h0<real>(s, P));
  EXPECT_EQ(st.omega.block, model_injection<real>(s, P));
}

TEST(BsBloch, ToyAMatchesBranchSolve) {
  const auto t = toy_a();
  const auto st = bs_bloch_solve<real>(t.spectrum, t.model, t.potential);
  const auto r = solve_bs_state(t.spectrum, t.model, t.potential, 0, -0.5, 0.5);
  EXPECT_NEAR(st.energies(0), r.energy, 1e-12);
  EXPECT_NEAR(st.energies(0), kToyA, 1e-12);
}

TEST(BsBloch, ToyCMatchesDeterminantRoots) {
  const auto t = toy_c();
  const auto st = bs_bloch_solve<real>(t.spectrum, t.model, t.potential);
  const auto roots = oracle::determinant_roots(full_matrix(t.spectrum, t.potential), -0.5, 0.5, 2000);
  ASSERT_EQ(roots.size(), 2u);
  EXPECT_NEAR(st.energies(0), roots[0], 1e-9);
  EXPECT_NEAR(st.energies(1), roots[1], 1e-9);
  for (double res : st.bs_residuals) EXPECT_LT(res, 1e-11);
  for (const auto& step : st.trace) EXPECT_LT(step.normalization_error, 1e-15);
}

TEST(BsBloch, EnergyDependentEnsemble) {
  EnsembleOptions opts;
  opts.instances = 8;
  for (const auto& inst : random_ensemble(opts)) {
    const auto st = bs_bloch_solve<real>(inst.spectrum, inst.model, inst.potential);
    const auto roots = oracle::determinant_roots(full_matrix(inst.spectrum, inst.potential), inst.lo, inst.hi, 4000);
    for (Eigen::Index a = 0; a < st.energies.size(); ++a)
      EXPECT_LT(distance_to(roots, st.energies(a)), 1e-9) << inst.id;
  }
}

TEST(BsBloch, ScaleCovariance) {
  // H0 -> c H0, V -> c V maps every energy E -> c E.
  const auto t = toy_c();
  const double c = 3.0;
  std::vector<double> h0 = t.spectrum.h0;
  for (double& e : h0) e *= c;
  const auto s2 = diagonal_spectrum(h0);
  const auto P2 = make_model_space(s2, t.model.p);
  const auto a = bs_bloch_solve<real>(t.spectrum, t.model, t.potential);
  const auto b = bs_bloch_solve<real>(s2, P2, t.potential.scaled(c));
  EXPECT_LT(max_abs(Vec<real>(b.energies - c * a.energies)), 1e-12);
}

TEST(BsBloch, PoleFloorRejected) {
  const auto s = diagonal_spectrum({0.0, 1e-8});
  const auto P = make_model_space(s, {0});
  EXPECT_EQ(kind_of([&] { bs_bloch_solve<real>(s, P, EnergyDependentPotential(2)); }), ErrorKind::PoleHit);
}

TEST(OracleScan, ToyExamples) {
  const auto b = toy_b();
  const auto rb = oracle_scan(b.spectrum, b.model, b.potential, -0.5, 0.5, 101);
  ASSERT_EQ(rb.size(), 1u);
  EXPECT_NEAR(rb[0].energy, kToyB, 1e-12);

  const auto a = toy_a();
  const auto ra = oracle_scan(a.spectrum, a.model, a.potential, -0.5, 0.5, 101);
  ASSERT_EQ(ra.size(), 1u);
  EXPECT_NEAR(ra[0].energy, kToyA, 1e-12);
}

TEST(OracleScan, ZeroPotentialFindsUnperturbedEnergies) {
  const auto s = diagonal_spectrum({-0.2, 0.35, 0.9, 1.4});
  const auto P = make_model_space(s, {0});
  const auto r = oracle_scan(s, P, EnergyDependentPotential(4), -0.5, 1.0, 64);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_NEAR(r[0].energy, -0.2, 1e-12);
  EXPECT_NEAR(r[1].energy, 0.35, 1e-12);
  EXPECT_NEAR(r[2].energy, 0.9, 1e-12);
}

TEST(OracleScan, AgreesWithDeterminantScan) {
  const auto t = quasi_degenerate(0.01, 0.2);
  const auto roots = oracle::determinant_roots(full_matrix(t.spectrum, t.potential), -0.3, 1.0, 4000);
  const auto scan = oracle_scan(t.spectrum, t.model, t.potential, -0.3, 1.0, 401, 2);
  ASSERT_EQ(scan.size(), roots.size());
  for (std::size_t i = 0; i < roots.size(); ++i) EXPECT_NEAR(scan[i].energy, roots[i], 1e-10);
}
