#pragma once

#include <cstdint>
#include <vector>

#include "bsbloch/model.hpp"
#include "bsbloch/potential.hpp"

namespace bsbloch {

struct Instance {
  Spectrum spectrum;
  ModelSpace model;
  EnergyDependentPotential potential{1};
};

/// h0 = (0, 1, 1.5, 2), P = {0}, constant V with V[0,1] = V[1,0] = coupling.
Instance toy_a(double coupling = 0.1);
/// One state at 0 with V(E) = 0.5 / (E + 2).
Instance toy_b();
/// h0 = (0, 0.01, 1, 1.2), P = {0, 1}, constant coupling 0.1 between P and Q.
Instance toy_c();
/// Tensor basis {0, 0.7} x {0, delta}, P = the two lowest states, constant +
/// rational + photon terms. delta = 0 gives the exactly degenerate limit.
Instance quasi_degenerate(double delta, double coupling = 0.05);

/// Seeded random weak-coupling instance: a tensor-product spectrum (N <= 8),
/// the lowest d <= 3 states as model space, and a constant + rational +
/// single-photon potential whose terms each stay below coupling * gap / 3.
struct RandomInstance {
  int id = 0;
  std::uint64_t seed = 0;
  Spectrum spectrum;
  ModelSpace model;
  EnergyDependentPotential potential{1};
  double gap = 0.0;         // min |E_m - e_q| over P x Q
  double separation = 0.0;  // min |E_m - E_m'| inside P (0 when d = 1)
  double lo = 0.0;          // oracle range
  double hi = 0.0;
};

struct EnsembleOptions {
  int instances = 50;
  std::uint64_t seed = 20240611;
  double coupling = 0.1;  // largest term entry, in units of gap / 3
  double min_gap = 0.2;
  double min_separation = 0.05;
  int photon_nodes = 8;
};

RandomInstance random_instance(std::uint64_t seed, int id, const EnsembleOptions& opts = {});
std::vector<RandomInstance> random_ensemble(const EnsembleOptions& opts = {});

}  // namespace bsbloch
