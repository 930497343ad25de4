#pragma once

#include <string>
#include <variant>
#include <vector>

#include "bsbloch/model.hpp"
#include "bsbloch/numerics.hpp"

namespace bsbloch {

/// Scalar photon-momentum profile g(k).
struct Profile {
  enum class Form { constant, gaussian, lorentzian };
  Form form = Form::constant;
  double amplitude = 1.0;
  double center = 0.0;
  double width = 1.0;

  double operator()(double k) const;
};

/// W, independent of the energy.
struct ConstantTerm {
  Mat<real> w;
};

/// W / (E - pole)^power.
struct RationalTerm {
  Mat<real> w;
  double pole = 0.0;
  int power = 1;
};

/// Single covariant photon exchange, f(k) = g(k) W, integrated on a quadrature
/// grid. Element (rs|V|tu) carries the two retarded denominators
///   1/(E - e_r - e_u - (k - i gamma) s_r) + 1/(E - e_s - e_t - (k - i gamma) s_s).
struct PhotonKernel {
  QuadratureGrid grid;
  Profile profile;
  Mat<real> coupling;
  double gamma = 0.0;
  std::vector<OrbitalPair> pairs;  // basis state -> (r, s)
};

struct PhotonTerm {
  PhotonKernel kernel;
};

using PotentialTerm = std::variant<ConstantTerm, RationalTerm, PhotonTerm>;

/// Energy-dependent interaction V(E) = sum of terms, all N x N.
class EnergyDependentPotential {
 public:
  explicit EnergyDependentPotential(std::size_t dim) : dim_(dim) {}
  EnergyDependentPotential(std::size_t dim, std::vector<PotentialTerm> terms);

  void add(PotentialTerm term);

  std::size_t dim() const { return dim_; }
  const std::vector<PotentialTerm>& terms() const { return terms_; }

  /// True when every term is a ConstantTerm (or there are none).
  bool energy_independent() const;
  /// True when some photon term has gamma > 0.
  bool needs_complex() const;

  /// Multiplies every coupling matrix by `factor`.
  EnergyDependentPotential scaled(double factor) const;

 private:
  void validate(const PotentialTerm& term) const;

  std::size_t dim_;
  std::vector<PotentialTerm> terms_;
};

/// Helper for a photon term on a tensor-product spectrum.
PhotonTerm make_photon_term(const Spectrum& s, QuadratureGrid grid, Profile profile,
                            Mat<real> coupling, double gamma = 0.0);

inline constexpr double kPhotonPoleTolerance = 1e-10;

template <typename Scalar>
Mat<Scalar> evaluate(const EnergyDependentPotential& v, Scalar e);

/// n-th derivative in E, n >= 1; computed analytically for every term type.
template <typename Scalar>
Mat<Scalar> derivative(const EnergyDependentPotential& v, Scalar e, int n);

/// Taylor coefficients V^(k)(E)/k! for k = 0..order.
template <typename Scalar>
std::vector<Mat<Scalar>> taylor(const EnergyDependentPotential& v, Scalar e, int order);

/// V(H_eff) B: sum over eigenpairs (E^a, r_a, l_a) of H_eff of
/// V^(n_deriv)(E^a) B r_a l_a. B is N x d, H_eff is d x d.
template <typename Scalar>
Mat<Scalar> apply_function_of_heff(const EnergyDependentPotential& v, const Mat<Scalar>& heff,
                                   const Mat<Scalar>& b, int n_deriv = 0);

}  // namespace bsbloch
