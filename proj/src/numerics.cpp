#include "bsbloch/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bsbloch {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Invalid: return "Invalid";
    case ErrorKind::Defective: return "Defective";
    case ErrorKind::ComplexSpectrum: return "ComplexSpectrum";
    case ErrorKind::Singular: return "Singular";
    case ErrorKind::BadRange: return "BadRange";
    case ErrorKind::PoleHit: return "PoleHit";
    case ErrorKind::CoincidentWithoutDerivative: return "CoincidentWithoutDerivative";
    case ErrorKind::NoRoot: return "NoRoot";
    case ErrorKind::BranchJump: return "BranchJump";
    case ErrorKind::Diverged: return "Diverged";
  }
  return "Unknown";
}

namespace {

constexpr double kMinOverlap = 1e-8;

template <typename Scalar>
EigenSystem<Scalar> finish_eigensystem(const Vec<cplx>& raw_values, Mat<Scalar> right,
                                       const Vec<Scalar>& values_unsorted) {
  const Eigen::Index n = raw_values.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (raw_values[a].real() != raw_values[b].real())
      return raw_values[a].real() < raw_values[b].real();
    return raw_values[a].imag() < raw_values[b].imag();
  });

  EigenSystem<Scalar> sys;
  sys.values.resize(n);
  sys.right.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    sys.values[k] = values_unsorted[src];
    Vec<Scalar> col = right.col(src);
    const double norm = col.norm();
    if (norm == 0.0) throw Error(ErrorKind::Defective, "eig_general: zero eigenvector");
    // Fix the phase so the largest component is real and positive.
    Eigen::Index imax = 0;
    col.cwiseAbs().maxCoeff(&imax);
    const Scalar phase = col[imax] / std::abs(col[imax]);
    sys.right.col(k) = col / (norm * phase);
  }

  Eigen::PartialPivLU<Mat<Scalar>> lu(sys.right);
  if (!(lu.rcond() > 1e-14))
    throw Error(ErrorKind::Defective, "eig_general: eigenvector matrix is singular");
  sys.left = lu.inverse();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double overlap = 1.0 / sys.left.row(k).norm();
    if (!(overlap >= kMinOverlap))
      throw Error(ErrorKind::Defective, "eig_general: left/right overlap below 1e-8");
  }
  return sys;
}

}  // namespace

template <>
EigenSystem<real> eig_general<real>(const Mat<real>& m) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::Invalid, "eig_general: matrix not square");
  if (!all_finite(m)) throw Error(ErrorKind::Invalid, "eig_general: non-finite entries");
  Eigen::EigenSolver<Mat<real>> es(m, true);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::Defective, "eig_general: QR failed");
  const Vec<cplx> raw = es.eigenvalues();
  for (Eigen::Index k = 0; k < raw.size(); ++k) {
    if (raw[k].imag() != 0.0)
      throw Error(ErrorKind::ComplexSpectrum,
                  "eig_general: real matrix has complex eigenvalue " +
                      std::to_string(raw[k].real()) + (raw[k].imag() < 0 ? "" : "+") +
                      std::to_string(raw[k].imag()) + "i");
  }
  const Mat<real> vectors = es.eigenvectors().real();
  return finish_eigensystem<real>(raw, vectors, raw.real());
}

template <>
EigenSystem<cplx> eig_general<cplx>(const Mat<cplx>& m) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::Invalid, "eig_general: matrix not square");
  if (!all_finite(m)) throw Error(ErrorKind::Invalid, "eig_general: non-finite entries");
  Eigen::ComplexEigenSolver<Mat<cplx>> es(m, true);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::Defective, "eig_general: QR failed");
  const Vec<cplx> raw = es.eigenvalues();
  return finish_eigensystem<cplx>(raw, es.eigenvectors(), raw);
}

template <typename Scalar>
Mat<Scalar> solve_linear(const Mat<Scalar>& a, const Mat<Scalar>& b) {
  if (a.rows() != a.cols() || a.rows() != b.rows())
    throw Error(ErrorKind::Invalid, "solve_linear: dimension mismatch");
  if (a.rows() == 0) return Mat<Scalar>(0, b.cols());
  Eigen::PartialPivLU<Mat<Scalar>> lu(a);
  const double rcond = lu.rcond();
  if (!(rcond >= 1e-12))
    throw Error(ErrorKind::Singular,
                "solve_linear: condition estimate " + std::to_string(1.0 / rcond) + " exceeds 1e12");
  Mat<Scalar> x = lu.solve(b);
  if (!all_finite(x)) throw Error(ErrorKind::Singular, "solve_linear: non-finite solution");
  return x;
}

template Mat<real> solve_linear<real>(const Mat<real>&, const Mat<real>&);
template Mat<cplx> solve_linear<cplx>(const Mat<cplx>&, const Mat<cplx>&);

QuadratureGrid gauss_legendre(int n, double kmin, double kmax) {
  if (n < 1) throw Error(ErrorKind::BadRange, "gauss_legendre: n must be >= 1");
  if (!(kmax > kmin)) throw Error(ErrorKind::BadRange, "gauss_legendre: kmax <= kmin");

  QuadratureGrid grid;
  grid.nodes.assign(static_cast<std::size_t>(n), 0.0);
  grid.weights.assign(static_cast<std::size_t>(n), 0.0);
  const double mid = 0.5 * (kmax + kmin);
  const double half = 0.5 * (kmax - kmin);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // Legendre recurrence for P_n(z) and its derivative.
      double p1 = 1.0, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      dp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z_old = z;
      z = z_old - p1 / dp;
      if (std::abs(z - z_old) <= 1e-16) break;
    }
    if (n == 1) {
      z = 0.0;
      dp = 1.0;
    }
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    grid.nodes[lo] = mid - half * z;
    grid.nodes[hi] = mid + half * z;
    const double w = 2.0 * half / ((1.0 - z * z) * dp * dp);
    grid.weights[lo] = w;
    grid.weights[hi] = w;
  }
  return grid;
}

}  // namespace bsbloch
