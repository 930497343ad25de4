#include "bsbloch/ensemble.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace bsbloch {

namespace {

Mat<real> random_symmetric(std::mt19937_64& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat<real> w(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) w(i, j) = w(j, i) = u(rng);
  return w;
}

// Rescales the coupling of `term` so that max |term(E)| = target.
template <typename Term>
void normalize_term(Term& term, double e, double target) {
  EnergyDependentPotential probe(static_cast<std::size_t>(
      [&] {
        if constexpr (std::is_same_v<Term, PhotonTerm>)
          return term.kernel.coupling.rows();
        else
          return term.w.rows();
      }()));
  probe.add(term);
  const double size = max_abs(evaluate<real>(probe, e));
  if (size == 0.0) return;
  if constexpr (std::is_same_v<Term, PhotonTerm>)
    term.kernel.coupling *= target / size;
  else
    term.w *= target / size;
}

}  // namespace

Instance toy_a(double coupling) {
  Instance t;
  t.spectrum = diagonal_spectrum({0.0, 1.0, 1.5, 2.0});
  t.model = make_model_space(t.spectrum, {0});
  Mat<real> w = Mat<real>::Zero(4, 4);
  w(0, 1) = w(1, 0) = coupling;
  t.potential = EnergyDependentPotential(4, {ConstantTerm{w}});
  return t;
}

Instance toy_b() {
  Instance t;
  t.spectrum = diagonal_spectrum({0.0});
  t.model = make_model_space(t.spectrum, {0});
  t.potential = EnergyDependentPotential(1, {RationalTerm{Mat<real>::Constant(1, 1, 0.5), -2.0, 1}});
  return t;
}

Instance toy_c() {
  Instance t;
  t.spectrum = diagonal_spectrum({0.0, 0.01, 1.0, 1.2});
  t.model = make_model_space(t.spectrum, {0, 1});
  Mat<real> w = Mat<real>::Zero(4, 4);
  for (int p = 0; p < 2; ++p)
    for (int q = 2; q < 4; ++q) w(p, q) = w(q, p) = 0.1;
  t.potential = EnergyDependentPotential(4, {ConstantTerm{w}});
  return t;
}

Instance quasi_degenerate(double delta, double coupling) {
  const std::vector<Orbital> h1{make_orbital(0, 0.0), make_orbital(1, 0.7)};
  const std::vector<Orbital> h2{make_orbital(0, 0.0), make_orbital(1, delta)};
  Instance t;
  t.spectrum = tensor_h0(h1, h2);
  t.model = make_model_space(t.spectrum, {0, 1});
  Mat<real> w(4, 4);
  w << 0.3, 0.5, 0.8, -0.4,
       0.5, -0.2, 0.6, 0.9,
       0.8, 0.6, 0.1, 0.7,
       -0.4, 0.9, 0.7, 0.2;
  w *= coupling;
  t.potential = EnergyDependentPotential(4);
  t.potential.add(ConstantTerm{w});
  t.potential.add(RationalTerm{0.5 * w.reverse(), -2.5, 2});
  t.potential.add(make_photon_term(t.spectrum, gauss_legendre(12, 2.5, 6.0),
                                   Profile{Profile::Form::gaussian, 1.0, 4.0, 1.0}, w));
  return t;
}

RandomInstance random_instance(std::uint64_t seed, int id, const EnsembleOptions& opts) {
  static constexpr std::array<std::pair<int, int>, 5> kShapes{
      {{2, 2}, {2, 3}, {3, 2}, {2, 4}, {4, 2}}};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  RandomInstance inst;
  inst.id = id;
  inst.seed = seed;
  for (int attempt = 0;; ++attempt) {
    if (attempt > 10000) throw Error(ErrorKind::Invalid, "random_instance: rejection sampling failed");
    const auto [n1, n2] = kShapes[std::uniform_int_distribution<std::size_t>(0, kShapes.size() - 1)(rng)];
    std::vector<Orbital> h1, h2;
    for (int i = 0; i < n1; ++i) h1.push_back(make_orbital(i, unit(rng)));
    for (int i = 0; i < n2; ++i) h2.push_back(make_orbital(i, unit(rng)));
    Spectrum s = tensor_h0(h1, h2);

    const std::size_t n = s.size();
    const std::size_t d = std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(3, n - 1))(rng);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return s.h0[a] < s.h0[b]; });
    std::vector<std::size_t> p(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(d));

    const double e_top = s.h0[order[d - 1]];
    const double gap = s.h0[order[d]] - e_top;
    double sep = d > 1 ? std::numeric_limits<double>::infinity() : 0.0;
    for (std::size_t k = 1; k < d; ++k) sep = std::min(sep, s.h0[order[k]] - s.h0[order[k - 1]]);
    if (gap < opts.min_gap || (d > 1 && sep < opts.min_separation)) continue;

    inst.spectrum = std::move(s);
    inst.model = make_model_space(inst.spectrum, p);
    inst.gap = gap;
    inst.separation = sep;
    inst.lo = inst.spectrum.h0[order[0]] - 0.4 * gap;
    inst.hi = e_top + 0.4 * gap;
    break;
  }

  const auto n = static_cast<Eigen::Index>(inst.spectrum.size());
  const double e_ref = 0.5 * (inst.lo + inst.hi);
  const double target = opts.coupling * inst.gap / 3.0;
  const double min_h0 = *std::min_element(inst.spectrum.h0.begin(), inst.spectrum.h0.end());

  ConstantTerm c{random_symmetric(rng, n)};
  normalize_term(c, e_ref, target * (0.5 + 0.5 * unit(rng)));

  RationalTerm r{random_symmetric(rng, n), min_h0 - 2.0 - unit(rng),
                 std::uniform_int_distribution<int>(1, 2)(rng)};
  normalize_term(r, e_ref, target * (0.5 + 0.5 * unit(rng)));

  Profile g{Profile::Form::gaussian, 1.0, 4.0, 1.0};
  PhotonTerm ph = make_photon_term(inst.spectrum, gauss_legendre(opts.photon_nodes, 2.5, 6.0), g,
                                   random_symmetric(rng, n));
  normalize_term(ph, e_ref, target * (0.5 + 0.5 * unit(rng)));

  inst.potential = EnergyDependentPotential(inst.spectrum.size(), {c, r, ph});
  return inst;
}

std::vector<RandomInstance> random_ensemble(const EnsembleOptions& opts) {
  std::vector<RandomInstance> out;
  out.reserve(static_cast<std::size_t>(std::max(0, opts.instances)));
  for (int i = 0; i < opts.instances; ++i)
    out.push_back(random_instance(opts.seed + static_cast<std::uint64_t>(i), i, opts));
  return out;
}

}  // namespace bsbloch
