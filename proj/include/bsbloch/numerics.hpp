#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "bsbloch/errors.hpp"

namespace bsbloch {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using real = double;
using cplx = std::complex<double>;

template <typename Scalar>
inline constexpr bool is_complex_v = false;
template <typename T>
inline constexpr bool is_complex_v<std::complex<T>> = true;

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

/// Eigen-decomposition M = R diag(values) L with L R = 1.
///
/// Columns of `right` are unit-norm right eigenvectors, rows of `left` the
/// biorthonormal left eigenvectors. Values are ordered by ascending real part,
/// ties broken by ascending imaginary part.
template <typename Scalar>
struct EigenSystem {
  Vec<Scalar> values;
  Mat<Scalar> right;
  Mat<Scalar> left;

  Eigen::Index size() const { return values.size(); }
};

/// Throws Error(Defective) when some |l_k r_k| / (|l_k| |r_k|) < 1e-8. For a
/// real scalar type a complex eigenvalue raises Error(ComplexSpectrum).
template <typename Scalar>
EigenSystem<Scalar> eig_general(const Mat<Scalar>& m);

/// Solves A X = B. Throws Error(Singular) when the reciprocal condition
/// estimate falls below 1e-12.
template <typename Scalar>
Mat<Scalar> solve_linear(const Mat<Scalar>& a, const Mat<Scalar>& b);

struct QuadratureGrid {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

/// n-point Gauss-Legendre rule on [kmin, kmax], nodes ascending.
QuadratureGrid gauss_legendre(int n, double kmin, double kmax);

/// Largest absolute entry, 0 for an empty matrix.
template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
  return m.size() == 0 ? 0.0 : static_cast<double>(m.cwiseAbs().maxCoeff());
}

}  // namespace bsbloch
