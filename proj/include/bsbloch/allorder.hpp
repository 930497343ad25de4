#pragma once

#include <vector>

#include "bsbloch/expansion.hpp"
#include "bsbloch/model.hpp"
#include "bsbloch/potential.hpp"

namespace bsbloch {

/// Brillouin-Wigner wave operator at fixed energy:
///   X = P + Gamma_Q(E) V(E) X,
/// i.e. P + Gamma_Q V P + Gamma_Q V Gamma_Q V P + ..., by one linear solve.
template <typename Scalar>
WaveOperator<Scalar> omega_bar(const Spectrum& s, const ModelSpace& P,
                               const EnergyDependentPotential& v, Scalar e);

/// P V(E) Omega-bar(E) P.
template <typename Scalar>
Mat<Scalar> heff_bar(const Spectrum& s, const ModelSpace& P, const EnergyDependentPotential& v,
                     Scalar e);

struct BranchOptions {
  int scan_points = 48;
  double tolerance = 1e-14;  // on |g(E) - E|, relative to 1 + |E|
  int max_iterations = 200;
  double min_overlap = 0.5;
};

struct BranchSolveReport {
  int branch = 0;
  double energy = 0.0;
  int iterations = 0;
  double residual = 0.0;
  /// Omega-bar(E*) Psi0, with Psi0 the unit model-space part of the branch
  /// eigenvector (largest component positive).
  Vec<real> wave_column;
  Vec<real> model_vector;
};

/// Eigen-branch of H0 + V(E) ordered by value at `energy`, whose eigenvector
/// has the largest weight on basis state `basis_index`.
int branch_for_model_state(const Spectrum& s, const ModelSpace& P, const EnergyDependentPotential& v,
                           std::size_t basis_index, double energy);

/// With `exclude_negative_energy_q` the excluded Q states are decoupled from
/// V(E) in every solver below, matching the reduced resolvent.

/// Fixed point E* = g(E*) of an eigen-branch g of H0 + V(E) inside
/// [lo, hi]. `branch` indexes the ascending eigenvalues at `lo`; the branch
/// is followed by eigenvector overlap.
BranchSolveReport solve_bs_state(const Spectrum& s, const ModelSpace& P,
                                 const EnergyDependentPotential& v, int branch, double lo,
                                 double hi, const BranchOptions& opts = {});

struct BsBlochOptions {
  double tolerance = 1e-13;
  int max_iterations = 2000;
  double mixing = 0.5;
  double min_mixing = 1.0 / 64.0;
  double gap_floor = 1e-6;
  int divergence_window = 25;
};

struct BsBlochStep {
  double delta_omega = 0.0;
  double delta_heff = 0.0;
  double mixing = 0.0;
  double normalization_error = 0.0;  // max |P Omega P - 1|
};

template <typename Scalar>
struct BsBlochState {
  WaveOperator<Scalar> omega;
  EffectiveHamiltonian<Scalar> heff;
  Vec<Scalar> energies;
  Mat<Scalar> right;  // model vectors, columns
  Mat<Scalar> left;   // biorthonormal rows
  std::vector<BsBlochStep> trace;
  /// |(E^a - H0 - V(E^a)) Omega Psi0^a| per eigenvalue, Psi0 unit norm.
  std::vector<double> bs_residuals;
  int iterations = 0;
};

/// Damped fixed-point solution of
///   [Omega, H0] P = V(H_eff) Omega P - Omega H'_eff,   H'_eff = P V(H_eff) Omega P.
template <typename Scalar>
BsBlochState<Scalar> bs_bloch_solve(const Spectrum& s, const ModelSpace& P,
                                    const EnergyDependentPotential& v,
                                    const BsBlochOptions& opts = {});

struct OracleRoot {
  double energy = 0.0;
  int branch = 0;
  double residual = 0.0;
};

/// Brute-force roots of E = g_j(E) for every eigen-branch of H0 + V(E) on a
/// uniform grid over [lo, hi]. Roots closer than 1e-8 are merged.
std::vector<OracleRoot> oracle_scan(const Spectrum& s, const ModelSpace& P,
                                    const EnergyDependentPotential& v, double lo, double hi,
                                    int n_grid, int jobs = 1);

inline constexpr double kRootDedup = 1e-8;

}  // namespace bsbloch
