#include "bsbloch/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bsbloch {

Orbital make_orbital(int index, double energy) {
  return Orbital{index, energy, energy >= 0.0 ? +1 : -1, false};
}

Orbital make_orbital(int index, double energy, int sign) {
  if (sign != 1 && sign != -1) throw Error(ErrorKind::Invalid, "orbital sign must be +1 or -1");
  Orbital o = make_orbital(index, energy);
  o.sign_overridden = o.sign != sign;
  o.sign = sign;
  return o;
}

Spectrum diagonal_spectrum(std::vector<double> h0) {
  if (h0.empty()) throw Error(ErrorKind::Invalid, "spectrum: empty basis");
  if (h0.size() > kMaxBasis) throw Error(ErrorKind::Invalid, "spectrum: basis exceeds 4096 states");
  Spectrum s;
  s.h0 = std::move(h0);
  for (std::size_t i = 0; i < s.h0.size(); ++i) {
    if (!std::isfinite(s.h0[i])) throw Error(ErrorKind::Invalid, "spectrum: non-finite energy");
    s.labels.push_back("|" + std::to_string(i) + ">");
  }
  return s;
}

Spectrum tensor_h0(std::span<const Orbital> h1, std::span<const Orbital> h2) {
  if (h1.empty() || h2.empty()) throw Error(ErrorKind::Invalid, "tensor_h0: empty orbital list");
  if (h1.size() * h2.size() > kMaxBasis)
    throw Error(ErrorKind::Invalid, "tensor_h0: basis exceeds 4096 states");
  Spectrum s;
  std::vector<OrbitalPair> pairs;
  for (const Orbital& r : h1) {
    for (const Orbital& t : h2) {
      s.h0.push_back(r.energy + t.energy);
      pairs.push_back({r, t});
      s.labels.push_back("|" + std::to_string(r.index) + "," + std::to_string(t.index) + ">");
    }
  }
  s.pairs = std::move(pairs);
  return s;
}

ModelSpace make_model_space(const Spectrum& s, std::vector<std::size_t> p,
                            bool exclude_negative_energy_q) {
  const std::size_t n = s.size();
  std::vector<bool> in_p(n, false);
  for (std::size_t i : p) {
    if (i >= n) {
      std::ostringstream msg;
      msg << "model space index " << i << " out of range [0, " << n << ")";
      throw Error(ErrorKind::Invalid, msg.str());
    }
    if (in_p[i]) throw Error(ErrorKind::Invalid, "model space index repeated: " + std::to_string(i));
    in_p[i] = true;
  }
  if (p.empty()) throw Error(ErrorKind::Invalid, "model space is empty");

  ModelSpace P;
  P.p = std::move(p);
  for (std::size_t i = 0; i < n; ++i)
    if (!in_p[i]) P.q.push_back(i);
  P.exclude_negative_energy_q = exclude_negative_energy_q;

  const double e0 = s.h0[P.p.front()];
  const bool degenerate = std::all_of(P.p.begin(), P.p.end(), [&](std::size_t i) {
    return std::abs(s.h0[i] - e0) <= 1e-12;
  });
  if (degenerate) P.degenerate_energy = e0;
  return P;
}

std::vector<double> model_energies(const Spectrum& s, const ModelSpace& P) {
  std::vector<double> e;
  e.reserve(P.dim());
  for (std::size_t i : P.p) e.push_back(s.h0[i]);
  return e;
}

template <typename Scalar>
Mat<Scalar> model_injection(const Spectrum& s, const ModelSpace& P) {
  Mat<Scalar> inj = Mat<Scalar>::Zero(static_cast<Eigen::Index>(s.size()),
                                      static_cast<Eigen::Index>(P.dim()));
  for (std::size_t m = 0; m < P.dim(); ++m)
    inj(static_cast<Eigen::Index>(P.p[m]), static_cast<Eigen::Index>(m)) = Scalar(1);
  return inj;
}

template <typename Scalar>
Mat<Scalar> h0_matrix(const Spectrum& s) {
  Vec<Scalar> d(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) d[static_cast<Eigen::Index>(i)] = Scalar(s.h0[i]);
  return d.asDiagonal();
}

template <typename Scalar>
Mat<Scalar> model_h0(const Spectrum& s, const ModelSpace& P) {
  Vec<Scalar> d(static_cast<Eigen::Index>(P.dim()));
  for (std::size_t m = 0; m < P.dim(); ++m)
    d[static_cast<Eigen::Index>(m)] = Scalar(s.h0[P.p[m]]);
  return d.asDiagonal();
}

namespace {

template <typename Scalar>
void throw_pole(std::size_t i, double level, Scalar e) {
  std::ostringstream msg;
  msg << "resolvent: energy " << e << " within 1e-12 of zeroth-order level " << level
      << " (state " << i << ")";
  throw Error(ErrorKind::PoleHit, msg.str());
}

bool has_hole(const Spectrum& s, std::size_t i) {
  if (!s.pairs) return false;
  const OrbitalPair& pr = (*s.pairs)[i];
  return pr.first.sign < 0 || pr.second.sign < 0;
}

}  // namespace

bool excluded_state(const Spectrum& s, const ModelSpace& P, std::size_t i) {
  if (!P.exclude_negative_energy_q || !has_hole(s, i)) return false;
  return std::find(P.p.begin(), P.p.end(), i) == P.p.end();
}

template <typename Scalar>
Vec<Scalar> resolvent_diagonal(const Spectrum& s, Scalar e) {
  Vec<Scalar> d(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Scalar gap = e - Scalar(s.h0[i]);
    if (std::abs(gap) <= kPoleTolerance) throw_pole(i, s.h0[i], e);
    d[static_cast<Eigen::Index>(i)] = Scalar(1) / gap;
  }
  return d;
}

template <typename Scalar>
Vec<Scalar> reduced_resolvent_diagonal(const Spectrum& s, const ModelSpace& P, Scalar e) {
  Vec<Scalar> d = Vec<Scalar>::Zero(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i : P.q) {
    if (P.exclude_negative_energy_q && has_hole(s, i)) continue;
    const Scalar gap = e - Scalar(s.h0[i]);
    if (std::abs(gap) <= kPoleTolerance) throw_pole(i, s.h0[i], e);
    d[static_cast<Eigen::Index>(i)] = Scalar(1) / gap;
  }
  return d;
}

#define BSBLOCH_INSTANTIATE(S)                                                              \
  template Mat<S> model_injection<S>(const Spectrum&, const ModelSpace&);                  \
  template Mat<S> h0_matrix<S>(const Spectrum&);                                            \
  template Mat<S> model_h0<S>(const Spectrum&, const ModelSpace&);                         \
  template Vec<S> resolvent_diagonal<S>(const Spectrum&, S);                                \
  template Vec<S> reduced_resolvent_diagonal<S>(const Spectrum&, const ModelSpace&, S);

BSBLOCH_INSTANTIATE(real)
BSBLOCH_INSTANTIATE(cplx)
#undef BSBLOCH_INSTANTIATE

}  // namespace bsbloch
