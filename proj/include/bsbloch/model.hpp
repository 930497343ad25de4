#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bsbloch/numerics.hpp"

namespace bsbloch {

/// Single-particle state. sign = +1 for particle, -1 for hole; normally the
/// sign of the energy, unless `sign_overridden` is set.
struct Orbital {
  int index = 0;
  double energy = 0.0;
  int sign = +1;
  bool sign_overridden = false;
};

Orbital make_orbital(int index, double energy);
Orbital make_orbital(int index, double energy, int sign);

struct OrbitalPair {
  Orbital first;
  Orbital second;
};

/// Zeroth-order two-particle basis. H0 is always diagonal in this basis.
struct Spectrum {
  std::vector<std::string> labels;
  std::vector<double> h0;
  std::optional<std::vector<OrbitalPair>> pairs;

  std::size_t size() const { return h0.size(); }
};

inline constexpr std::size_t kMaxBasis = 4096;

Spectrum diagonal_spectrum(std::vector<double> h0);

/// Straight (non-antisymmetrized) product basis |rs>, index r * |h2| + s.
Spectrum tensor_h0(std::span<const Orbital> h1, std::span<const Orbital> h2);

struct ModelSpace {
  std::vector<std::size_t> p;  // model states, in model-space column order
  std::vector<std::size_t> q;  // complement, ascending
  std::optional<double> degenerate_energy;
  /// Drop Q states containing a hole orbital from the reduced resolvent.
  bool exclude_negative_energy_q = false;

  std::size_t dim() const { return p.size(); }
};

/// Validates the indices and records E0 when all model energies agree to 1e-12.
ModelSpace make_model_space(const Spectrum& s, std::vector<std::size_t> p,
                            bool exclude_negative_energy_q = false);

/// True for a Q state that the reduced resolvent drops (hole content with
/// `exclude_negative_energy_q` set).
bool excluded_state(const Spectrum& s, const ModelSpace& P, std::size_t i);

/// Zeroth-order energies of the model states, in column order.
std::vector<double> model_energies(const Spectrum& s, const ModelSpace& P);

/// N x d injection of the model space into the full basis.
template <typename Scalar>
Mat<Scalar> model_injection(const Spectrum& s, const ModelSpace& P);

/// Diagonal H0 as a dense matrix.
template <typename Scalar>
Mat<Scalar> h0_matrix(const Spectrum& s);

/// d x d block P H0 P.
template <typename Scalar>
Mat<Scalar> model_h0(const Spectrum& s, const ModelSpace& P);

inline constexpr double kPoleTolerance = 1e-12;

/// Diagonal of (E - H0)^-1.
template <typename Scalar>
Vec<Scalar> resolvent_diagonal(const Spectrum& s, Scalar e);

/// Diagonal of Q (E - H0)^-1; zero on the model space (and on excluded
/// negative-energy Q states). Model-space poles are allowed.
template <typename Scalar>
Vec<Scalar> reduced_resolvent_diagonal(const Spectrum& s, const ModelSpace& P, Scalar e);

template <typename Scalar>
Mat<Scalar> resolvent(const Spectrum& s, Scalar e) {
  return resolvent_diagonal(s, e).asDiagonal();
}

template <typename Scalar>
Mat<Scalar> reduced_resolvent(const Spectrum& s, const ModelSpace& P, Scalar e) {
  return reduced_resolvent_diagonal(s, P, e).asDiagonal();
}

}  // namespace bsbloch
