#pragma once

#include <functional>
#include <map>

#include "bsbloch/diffratio.hpp"
#include "bsbloch/model.hpp"
#include "bsbloch/potential.hpp"

namespace bsbloch {

/// N x d block of the wave operator in the H0 eigenbasis, one column per
/// model state. A full wave operator has P rows equal to the identity
/// (intermediate normalization); an order increment has zero P rows.
template <typename Scalar>
struct WaveOperator {
  Mat<Scalar> block;
};

/// H_eff = P H0 P + H'_eff (d x d).
template <typename Scalar>
struct EffectiveHamiltonian {
  Mat<Scalar> h0_part;
  Mat<Scalar> interaction;

  Mat<Scalar> matrix() const { return h0_part + interaction; }
};

/// One order of the expansion; the fold (model-space contribution) share is
/// kept separately and already included in `omega` and `heff`.
template <typename Scalar>
struct OrderTerms {
  Mat<Scalar> omega;      // N x d
  Mat<Scalar> heff;       // d x d
  Mat<Scalar> omega_msc;  // N x d
  Mat<Scalar> heff_msc;   // d x d
};

template <typename Scalar>
struct ExpansionLedger {
  Mat<Scalar> injection;  // P, as N x d
  Mat<Scalar> model_h0;   // P H0 P
  std::map<int, OrderTerms<Scalar>> orders;

  bool has(int n) const { return orders.count(n) != 0; }
  int max_order() const { return orders.empty() ? 0 : orders.rbegin()->first; }
  /// P + sum of omega increments up to `through` (all orders when < 0).
  WaveOperator<Scalar> omega(int through = -1) const;
  EffectiveHamiltonian<Scalar> heff(int through = -1) const;
};

/// Rayleigh-Schroedinger operators as functions of the energy parameter E.
///
/// Each operator is an N x d (or d x d) matrix whose column m is the operator
/// acting on model state m as if that state had energy E; the physical value
/// of column m is taken at E = E_m (its own zeroth-order energy). Folds
///   (dA/dE)* B  :  column m = sum_j A[E_j, E](:, j) B(E)(j, m)
/// use difference ratios of whole operators, with the derivative limit when
/// E_j = E. All E-dependence is carried as exact Taylor jets.
template <typename Scalar>
class RsExpansion {
 public:
  using JetFn = std::function<Jet<Mat<Scalar>>(Scalar, int)>;

  static constexpr int kMaxOrder = 3;

  RsExpansion(const Spectrum& s, const ModelSpace& P, const EnergyDependentPotential& v);

  /// Omega-bar^(n): (Gamma_Q V)^n P, no intermediate model states.
  Jet<Mat<Scalar>> omega_bar(int n, Scalar e, int order) const;
  /// H-bar^(n): P V (Gamma_Q V)^(n-1) P.
  Jet<Mat<Scalar>> heff_bar(int n, Scalar e, int order) const;
  Jet<Mat<Scalar>> omega(int n, Scalar e, int order) const;
  Jet<Mat<Scalar>> heff(int n, Scalar e, int order) const;
  Jet<Mat<Scalar>> omega_msc(int n, Scalar e, int order) const;
  Jet<Mat<Scalar>> heff_msc(int n, Scalar e, int order) const;

  /// Column m of f evaluated at E = E_m.
  Mat<Scalar> on_shell(const JetFn& f) const;

  OrderTerms<Scalar> order_terms(int n) const;

  const std::vector<Scalar>& energies() const { return energies_; }

 private:
  Jet<Mat<Scalar>> fold(const JetFn& a, const JetFn& b, Scalar e, int order) const;
  Jet<Mat<Scalar>> chain(int n, Scalar e, int order) const;  // (Gamma_Q V)^n, N x N
  Jet<Mat<Scalar>> gamma_v(Scalar e, int order) const;
  JetFn bind(Jet<Mat<Scalar>> (RsExpansion::*fn)(int, Scalar, int) const, int n) const;

  const Spectrum* s_;
  const ModelSpace* P_;
  const EnergyDependentPotential* v_;
  std::vector<Scalar> energies_;
};

/// Column m: Gamma_Q(E_m) V(E_m) e_m.
template <typename Scalar>
Mat<Scalar> omega1(const Spectrum& s, const ModelSpace& P, const EnergyDependentPotential& v);
/// Element (m', m): (P V(E_m) P)_{m' m}.
template <typename Scalar>
Mat<Scalar> heff1(const Spectrum& s, const ModelSpace& P, const EnergyDependentPotential& v);

/// Second and third order; the ledger must already hold the lower orders.
template <typename Scalar>
Mat<Scalar> omega2(const Spectrum& s, const ModelSpace& P, const EnergyDependentPotential& v,
                   const ExpansionLedger<Scalar>& ledger);
template <typename Scalar>
Mat<Scalar> heff2(const Spectrum& s, const ModelSpace& P, const EnergyDependentPotential& v,
                  const ExpansionLedger<Scalar>& ledger);
template <typename Scalar>
Mat<Scalar> omega3(const Spectrum& s, const ModelSpace& P, const EnergyDependentPotential& v,
                   const ExpansionLedger<Scalar>& ledger);
template <typename Scalar>
Mat<Scalar> heff3(const Spectrum& s, const ModelSpace& P, const EnergyDependentPotential& v,
                  const ExpansionLedger<Scalar>& ledger);

/// Orders 1..max_order (max 3) with the fold terms recorded separately.
template <typename Scalar>
ExpansionLedger<Scalar> expand(const Spectrum& s, const ModelSpace& P,
                               const EnergyDependentPotential& v, int max_order = 3);

/// Generalized Bloch recursion for an energy-independent V:
///   (E_m - e_q) Omega^(n)_qm = (V Omega^(n-1) - sum_k Omega^(n-k) H^(k))_qm,
///   H^(n) = P V Omega^(n-1) P.
template <typename Scalar>
ExpansionLedger<Scalar> bloch_iterate(const Spectrum& s, const ModelSpace& P,
                                      const EnergyDependentPotential& v, int max_order);

}  // namespace bsbloch
