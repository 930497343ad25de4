#include "bsbloch/potential.hpp"

#include <cmath>
#include <sstream>

namespace bsbloch {

double Profile::operator()(double k) const {
  switch (form) {
    case Form::constant: return amplitude;
    case Form::gaussian: {
      const double x = (k - center) / width;
      return amplitude * std::exp(-0.5 * x * x);
    }
    case Form::lorentzian: {
      const double x = k - center;
      return amplitude * width * width / (x * x + width * width);
    }
  }
  return 0.0;
}

EnergyDependentPotential::EnergyDependentPotential(std::size_t dim, std::vector<PotentialTerm> terms)
    : dim_(dim) {
  for (auto& t : terms) add(std::move(t));
}

void EnergyDependentPotential::validate(const PotentialTerm& term) const {
  const auto n = static_cast<Eigen::Index>(dim_);
  auto check_square = [&](const Mat<real>& w, const char* what) {
    if (w.rows() != n || w.cols() != n) {
      std::ostringstream msg;
      msg << what << " matrix is " << w.rows() << "x" << w.cols() << ", expected " << n << "x" << n;
      throw Error(ErrorKind::Invalid, msg.str());
    }
    if (!all_finite(w)) throw Error(ErrorKind::Invalid, std::string(what) + " matrix not finite");
  };
  std::visit(
      [&](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, ConstantTerm>) {
          check_square(t.w, "constant term");
        } else if constexpr (std::is_same_v<T, RationalTerm>) {
          check_square(t.w, "rational term");
          if (t.power < 1) throw Error(ErrorKind::Invalid, "rational term power must be >= 1");
          if (!std::isfinite(t.pole)) throw Error(ErrorKind::Invalid, "rational term pole not finite");
        } else {
          const PhotonKernel& k = t.kernel;
          check_square(k.coupling, "photon coupling");
          if (!(k.gamma >= 0.0)) throw Error(ErrorKind::Invalid, "photon gamma must be >= 0");
          if (k.pairs.size() != dim_)
            throw Error(ErrorKind::Invalid, "photon term needs an orbital pair for every basis state");
          if (k.grid.nodes.empty() || k.grid.nodes.size() != k.grid.weights.size())
            throw Error(ErrorKind::Invalid, "photon quadrature grid is empty or inconsistent");
          for (double node : k.grid.nodes)
            if (node < 0.0) throw Error(ErrorKind::Invalid, "photon quadrature node below zero");
        }
      },
      term);
}

void EnergyDependentPotential::add(PotentialTerm term) {
  validate(term);
  terms_.push_back(std::move(term));
}

bool EnergyDependentPotential::energy_independent() const {
  for (const auto& t : terms_)
    if (!std::holds_alternative<ConstantTerm>(t)) return false;
  return true;
}

bool EnergyDependentPotential::needs_complex() const {
  for (const auto& t : terms_)
    if (const auto* p = std::get_if<PhotonTerm>(&t); p && p->kernel.gamma > 0.0) return true;
  return false;
}

EnergyDependentPotential EnergyDependentPotential::scaled(double factor) const {
  EnergyDependentPotential out(dim_);
  for (PotentialTerm t : terms_) {
    std::visit(
        [&](auto& term) {
          using T = std::decay_t<decltype(term)>;
          if constexpr (std::is_same_v<T, PhotonTerm>)
            term.kernel.coupling *= factor;
          else
            term.w *= factor;
        },
        t);
    out.terms_.push_back(std::move(t));
  }
  return out;
}

PhotonTerm make_photon_term(const Spectrum& s, QuadratureGrid grid, Profile profile,
                            Mat<real> coupling, double gamma) {
  if (!s.pairs) throw Error(ErrorKind::Invalid, "photon term requires a tensor-product spectrum");
  return PhotonTerm{PhotonKernel{std::move(grid), profile, std::move(coupling), gamma, *s.pairs}};
}

namespace {

double binomial(int n, int k) {
  double b = 1.0;
  for (int i = 1; i <= k; ++i) b = b * (n - k + i) / i;
  return b;
}

template <typename Scalar>
Scalar ipow(Scalar x, int n) {
  Scalar r(1);
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

// Adds the Taylor coefficients V^(k)(E)/k!, k = 0..order, of one term.
template <typename Scalar>
void accumulate(const ConstantTerm& t, Scalar, std::vector<Mat<Scalar>>& out) {
  out[0] += t.w.template cast<Scalar>();
}

template <typename Scalar>
void accumulate(const RationalTerm& t, Scalar e, std::vector<Mat<Scalar>>& out) {
  const Scalar x = e - Scalar(t.pole);
  if (std::abs(x) <= kPoleTolerance) {
    std::ostringstream msg;
    msg << "rational term: energy " << e << " at pole " << t.pole;
    throw Error(ErrorKind::PoleHit, msg.str());
  }
  const Mat<Scalar> w = t.w.template cast<Scalar>();
  for (std::size_t k = 0; k < out.size(); ++k) {
    const int ki = static_cast<int>(k);
    const double c = (ki % 2 ? -1.0 : 1.0) * binomial(t.power + ki - 1, ki);
    out[k] += (Scalar(c) / ipow(x, t.power + ki)) * w;
  }
}

template <typename Scalar>
void accumulate(const PhotonTerm& t, Scalar e, std::vector<Mat<Scalar>>& out) {
  const PhotonKernel& k = t.kernel;
  if constexpr (!is_complex_v<Scalar>) {
    if (k.gamma > 0.0)
      throw Error(ErrorKind::Invalid, "photon term with gamma > 0 needs complex arithmetic");
  }
  const std::size_t nodes = k.grid.size();
  std::vector<double> strength(nodes);
  for (std::size_t i = 0; i < nodes; ++i) strength[i] = k.grid.weights[i] * k.profile(k.grid.nodes[i]);

  auto node_shift = [&](std::size_t i, int sign) {
    if constexpr (is_complex_v<Scalar>)
      return Scalar(k.grid.nodes[i] * sign, -k.gamma * sign);
    else
      return Scalar(k.grid.nodes[i] * sign);
  };
  auto denominator = [&](Scalar base, std::size_t node, int sign) {
    const Scalar d = base - node_shift(node, sign);
    if (std::abs(d) < kPhotonPoleTolerance) {
      std::ostringstream msg;
      msg << "photon term: denominator vanishes at quadrature node " << node << " (k = "
          << k.grid.nodes[node] << ", E = " << e << ")";
      throw Error(ErrorKind::PoleHit, msg.str());
    }
    return d;
  };

  const auto n = static_cast<Eigen::Index>(k.pairs.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const OrbitalPair& rs = k.pairs[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < n; ++j) {
      const double w = k.coupling(i, j);
      if (w == 0.0) continue;
      const OrbitalPair& tu = k.pairs[static_cast<std::size_t>(j)];
      const Scalar base1 = e - Scalar(rs.first.energy + tu.second.energy);
      const Scalar base2 = e - Scalar(rs.second.energy + tu.first.energy);
      for (std::size_t node = 0; node < nodes; ++node) {
        const Scalar inv1 = Scalar(1) / denominator(base1, node, rs.first.sign);
        const Scalar inv2 = Scalar(1) / denominator(base2, node, rs.second.sign);
        // d^k/dE^k (1/x) / k! = (-1)^k / x^(k+1)
        Scalar p1 = inv1, p2 = inv2;
        for (std::size_t order = 0; order < out.size(); ++order) {
          const double sgn = order % 2 ? -1.0 : 1.0;
          out[order](i, j) += Scalar(sgn * strength[node] * w) * (p1 + p2);
          p1 *= inv1;
          p2 *= inv2;
        }
      }
    }
  }
}

}  // namespace

template <typename Scalar>
std::vector<Mat<Scalar>> taylor(const EnergyDependentPotential& v, Scalar e, int order) {
  if (order < 0) throw Error(ErrorKind::Invalid, "taylor: negative order");
  const auto n = static_cast<Eigen::Index>(v.dim());
  std::vector<Mat<Scalar>> out(static_cast<std::size_t>(order) + 1, Mat<Scalar>::Zero(n, n));
  for (const auto& term : v.terms())
    std::visit([&](const auto& t) { accumulate<Scalar>(t, e, out); }, term);
  for (const auto& m : out)
    if (!all_finite(m)) throw Error(ErrorKind::PoleHit, "potential: non-finite value");
  return out;
}

template <typename Scalar>
Mat<Scalar> evaluate(const EnergyDependentPotential& v, Scalar e) {
  return std::move(taylor(v, e, 0)[0]);
}

template <typename Scalar>
Mat<Scalar> derivative(const EnergyDependentPotential& v, Scalar e, int n) {
  if (n < 1) throw Error(ErrorKind::Invalid, "derivative: order must be >= 1");
  auto coeffs = taylor(v, e, n);
  double factorial = 1.0;
  for (int i = 2; i <= n; ++i) factorial *= i;
  return coeffs[static_cast<std::size_t>(n)] * Scalar(factorial);
}

template <typename Scalar>
Mat<Scalar> apply_function_of_heff(const EnergyDependentPotential& v, const Mat<Scalar>& heff,
                                   const Mat<Scalar>& b, int n_deriv) {
  if (heff.rows() != heff.cols() || b.cols() != heff.rows() ||
      b.rows() != static_cast<Eigen::Index>(v.dim()))
    throw Error(ErrorKind::Invalid, "apply_function_of_heff: dimension mismatch");
  const EigenSystem<Scalar> eig = eig_general(heff);
  Mat<Scalar> out = Mat<Scalar>::Zero(b.rows(), b.cols());
  for (Eigen::Index a = 0; a < eig.size(); ++a) {
    const Scalar ea = eig.values[a];
    const Mat<Scalar> va = n_deriv == 0 ? evaluate(v, ea) : derivative(v, ea, n_deriv);
    out.noalias() += (va * (b * eig.right.col(a))) * eig.left.row(a);
  }
  return out;
}

#define BSBLOCH_INSTANTIATE(S)                                                                  \
  template Mat<S> evaluate<S>(const EnergyDependentPotential&, S);                             \
  template Mat<S> derivative<S>(const EnergyDependentPotential&, S, int);                      \
  template std::vector<Mat<S>> taylor<S>(const EnergyDependentPotential&, S, int);             \
  template Mat<S> apply_function_of_heff<S>(const EnergyDependentPotential&, const Mat<S>&,    \
                                            const Mat<S>&, int);

BSBLOCH_INSTANTIATE(real)
BSBLOCH_INSTANTIATE(cplx)
#undef BSBLOCH_INSTANTIATE

}  // namespace bsbloch
