#include "bsbloch/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "bsbloch/allorder.hpp"
#include "bsbloch/diffratio.hpp"
#include "bsbloch/ensemble.hpp"
#include "bsbloch/expansion.hpp"

namespace bsbloch {

namespace {

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

EnsembleOptions ensemble_options(const AcceptanceOptions& opts) {
  EnsembleOptions eo;
  eo.instances = opts.instances;
  eo.seed = opts.seed;
  return eo;
}

// Nearest eigenvalue of H0 + V(E) to E, with its eigenvector.
std::pair<double, Vec<real>> exact_state(const Spectrum& s, const EnergyDependentPotential& v, double e) {
  const EigenSystem<real> sys = eig_general<real>(h0_matrix<real>(s) + evaluate(v, e));
  Eigen::Index best = 0;
  (sys.values.array() - e).abs().minCoeff(&best);
  return {sys.values[best], sys.right.col(best)};
}

// Largest |(sum_{n<=3} H'^(n) - heff_bar(E^a)) Psi0^a| over the eigenpairs of
// the converged effective Hamiltonian.
double bridge_remainder(const RandomInstance& in, const EnergyDependentPotential& v) {
  const BsBlochState<real> st = bs_bloch_solve<real>(in.spectrum, in.model, v);
  const ExpansionLedger<real> ledger = expand<real>(in.spectrum, in.model, v, 3);
  const Mat<real> rs = ledger.heff(3).interaction;
  double worst = 0.0;
  for (Eigen::Index a = 0; a < st.energies.size(); ++a) {
    const Vec<real> psi = st.right.col(a).normalized();
    const Mat<real> bw = heff_bar<real>(in.spectrum, in.model, v, st.energies[a]);
    worst = std::max(worst, ((rs - bw) * psi).norm());
  }
  return worst;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

CriterionResult check_oracle_equivalence(const AcceptanceOptions& opts) {
  CriterionResult r{1, "oracle-equivalence", false, ""};
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0, worst_branch = 0.0;
  std::size_t eigenvalues = 0, unmatched = 0;
  std::string failure;
  try {
    for (const RandomInstance& in : random_ensemble(ensemble_options(opts))) {
      const BsBlochState<real> st = bs_bloch_solve<real>(in.spectrum, in.model, in.potential);
      const std::vector<OracleRoot> roots =
          oracle_scan(in.spectrum, in.model, in.potential, in.lo, in.hi, 201, opts.jobs);
      for (Eigen::Index a = 0; a < st.energies.size(); ++a) {
        double best = std::numeric_limits<double>::infinity();
        for (const OracleRoot& root : roots) best = std::min(best, std::abs(root.energy - st.energies[a]));
        worst = std::max(worst, best);
        unmatched += best > 1e-9 ? 1 : 0;
        ++eigenvalues;
      }
      // Each model state's branch from the scalar fixed-point solve.
      for (std::size_t m = 0; m < in.model.dim(); ++m) {
        const int b = branch_for_model_state(in.spectrum, in.model, in.potential, in.model.p[m], in.lo);
        const BranchSolveReport rep = solve_bs_state(in.spectrum, in.model, in.potential, b, in.lo, in.hi);
        const double d = (st.energies.array() - rep.energy).abs().minCoeff();
        worst_branch = std::max(worst_branch, d);
        unmatched += d > 1e-9 ? 1 : 0;
      }
    }
  } catch (const Error& e) {
    failure = e.what();
  }
  const double elapsed = seconds_since(t0);
  r.passed = failure.empty() && unmatched == 0 && elapsed <= 10.0;
  std::ostringstream os;
  os << opts.instances << " instances, " << eigenvalues << " eigenvalues; worst |bs_bloch - oracle| "
     << sci(worst) << ", worst |bs_bloch - branch solve| " << sci(worst_branch) << ", tolerance 1e-9; "
     << sci(elapsed) << " s (limit 10 s)";
  if (!failure.empty()) os << "; error: " << failure;
  r.detail = os.str();
  return r;
}

CriterionResult check_rs_bw_bridge(const AcceptanceOptions& opts) {
  CriterionResult r{2, "rs-bw-bridge", false, ""};
  double full = 0.0, half = 0.0, min_ratio = std::numeric_limits<double>::infinity();
  int min_id = -1;
  double worst_vec = 0.0;
  std::string failure;
  try {
    for (const RandomInstance& in : random_ensemble(ensemble_options(opts))) {
      const double a = bridge_remainder(in, in.potential);
      const double b = bridge_remainder(in, in.potential.scaled(0.5));
      full = std::max(full, a);
      half = std::max(half, b);
      if (a / b < min_ratio) {
        min_ratio = a / b;
        min_id = in.id;
      }
      for (std::size_t m = 0; m < in.model.dim(); ++m) {
        const int br = branch_for_model_state(in.spectrum, in.model, in.potential, in.model.p[m], in.lo);
        const BranchSolveReport rep = solve_bs_state(in.spectrum, in.model, in.potential, br, in.lo, in.hi);
        auto [e, x] = exact_state(in.spectrum, in.potential, rep.energy);
        (void)e;
        Vec<real> xp(static_cast<Eigen::Index>(in.model.dim()));
        for (std::size_t k = 0; k < in.model.dim(); ++k)
          xp[static_cast<Eigen::Index>(k)] = x[static_cast<Eigen::Index>(in.model.p[k])];
        Eigen::Index imax = 0;
        xp.cwiseAbs().maxCoeff(&imax);
        const double scale = xp[imax] < 0 ? -xp.norm() : xp.norm();
        worst_vec = std::max(worst_vec, max_abs(rep.wave_column - x / scale));
      }
    }
  } catch (const Error& e) {
    failure = e.what();
  }
  const double ratio = full / half;
  r.passed = failure.empty() && ratio >= 8.0 && worst_vec <= 1e-9;
  std::ostringstream os;
  os << "ensemble max remainder " << sci(full) << " -> " << sci(half) << " on halving, ratio " << sci(ratio)
     << " (need >= 8); smallest single-instance ratio " << sci(min_ratio) << " (instance " << min_id
     << "); worst |Omega-bar Psi0 - exact eigenvector| " << sci(worst_vec) << " (need <= 1e-9)";
  if (!failure.empty()) os << "; error: " << failure;
  r.detail = os.str();
  return r;
}

CriterionResult check_closed_form_fixed_points() {
  CriterionResult r{3, "closed-form-fixed-points", false, ""};
  const double eb = -1.0 + std::sqrt(1.5);
  const double ea = 0.5 * (1.0 - std::sqrt(1.04));
  double worst = 0.0;
  std::ostringstream os;
  try {
    const Instance b = toy_b(), a = toy_a();
    const double b_bw = solve_bs_state(b.spectrum, b.model, b.potential, 0, -0.5, 0.5).energy;
    const double b_bl = bs_bloch_solve<real>(b.spectrum, b.model, b.potential).energies[0];
    const double a_bw = solve_bs_state(a.spectrum, a.model, a.potential, 0, -0.5, 0.5).energy;
    const double a_bl = bs_bloch_solve<real>(a.spectrum, a.model, a.potential).energies[0];
    for (double d : {b_bw - eb, b_bl - eb, a_bw - ea, a_bl - ea}) worst = std::max(worst, std::abs(d));
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "toy B %.13f / %.13f (exact %.13f); toy A %.13f / %.13f (exact %.13f); worst %s",
                  b_bw, b_bl, eb, a_bw, a_bl, ea, sci(worst).c_str());
    os << buf;
    r.passed = worst <= 1e-12;
  } catch (const Error& e) {
    os << "error: " << e.what();
  }
  r.detail = os.str();
  return r;
}

CriterionResult check_counterterm_continuity() {
  CriterionResult r{4, "counterterm-continuity", false, ""};
  std::ostringstream os;
  try {
    const Instance z = quasi_degenerate(0.0);
    const ExpansionLedger<real> lz = expand<real>(z.spectrum, z.model, z.potential, 3);
    bool finite = true;
    auto distance = [&](double delta) {
      const Instance q = quasi_degenerate(delta);
      const ExpansionLedger<real> lq = expand<real>(q.spectrum, q.model, q.potential, 3);
      double d = 0.0;
      for (int n = 2; n <= 3; ++n) {
        const OrderTerms<real>& a = lq.orders.at(n);
        const OrderTerms<real>& b = lz.orders.at(n);
        finite = finite && all_finite(a.omega) && all_finite(a.heff) && all_finite(a.omega_msc) &&
                 all_finite(a.heff_msc);
        d = std::max({d, max_abs(a.omega_msc - b.omega_msc), max_abs(a.heff_msc - b.heff_msc)});
      }
      return d;
    };
    const double d_big = distance(1e-2), d_small = distance(1e-4);
    const double c = d_big / 1e-2;
    const double ratio = d_big / d_small;
    r.passed = finite && ratio >= 50.0 && ratio <= 200.0;
    os << "max |MSC(delta) - MSC(0)|: " << sci(d_big) << " at 1e-2, " << sci(d_small) << " at 1e-4; ratio "
       << sci(ratio) << " (need 50..200); C = " << sci(c) << ", C*1e-4 = " << sci(c * 1e-4)
       << (finite ? "; ledgers finite" : "; non-finite ledger entry");
  } catch (const Error& e) {
    os << "error: " << e.what();
  }
  r.detail = os.str();
  return r;
}

CriterionResult check_difference_ratio_limits() {
  CriterionResult r{5, "difference-ratio-limits", false, ""};
  // Difference ratios of order n at spread h carry rounding noise of order
  // eps / h^n, so the exponential is evaluated with 50 significant digits.
  using big = boost::multiprecision::cpp_bin_float_50;
  const DifferentiableFunction<big, big> fexp{[](big x) { return big(exp(x)); },
                                              [](big x, int) { return big(exp(x)); }};
  std::ostringstream os;
  bool ok = true;
  double worst_order = std::numeric_limits<double>::infinity();
  os << "exp observed order:";
  for (int n = 1; n <= 4; ++n) {
    const big d3 = taylor_limit_check(fexp, big(0), n, big("1e-3"));
    const big d4 = taylor_limit_check(fexp, big(0), n, big("1e-4"));
    const double order = static_cast<double>(log10(d3 / d4));
    worst_order = std::min(worst_order, order);
    ok = ok && order >= 0.9;
    os << " n=" << n << " " << sci(order);
  }

  auto power = [](int k) {
    return DifferentiableFunction<double, double>{
        [k](double x) { return std::pow(x, k); },
        [k](double x, int n) {
          if (n > k) return 0.0;
          double c = 1.0;
          for (int i = 0; i < n; ++i) c *= (k - i);
          return c * std::pow(x, k - n);
        }};
  };
  double worst_poly = 0.0;
  auto expect = [&](double got, double want) { worst_poly = std::max(worst_poly, std::abs(got - want)); };
  expect(diff_ratio(power(2), SamplePoints<double>{1.0, {2.0}}, 1), 3.0);
  expect(diff_ratio(power(2), SamplePoints<double>{-0.3, {0.7, 2.9}}, 2), 1.0);
  expect(diff_ratio(power(3), SamplePoints<double>{0.0, {1.0, 2.0, 3.0}}, 3), 1.0);
  expect(diff_ratio(power(3), SamplePoints<double>{1.0, {2.0, 4.0}}, 2), 1.0 + 2.0 + 4.0);
  expect(diff_ratio(power(4), SamplePoints<double>{0.5, {0.5, 1.5, 1.5}}, 3), 0.5 + 0.5 + 1.5 + 1.5);
  // Dyadic spreads keep every sample point and power exact in binary.
  for (int n = 1; n <= 4; ++n)
    for (double h : {0x1p-3, 0x1p-10}) expect(taylor_limit_check(power(n - 1), 0.25, n, h), 0.0);
  ok = ok && worst_poly <= 1e-13;
  os << "; worst order " << sci(worst_order) << " (need >= 0.9); polynomial worst error " << sci(worst_poly)
     << " (need <= 1e-13)";
  r.passed = ok;
  r.detail = os.str();
  return r;
}

CriterionResult check_energy_independent_limit(const AcceptanceOptions& opts) {
  CriterionResult r{6, "energy-independent-limit", false, ""};
  std::vector<Instance> cases{toy_a(), toy_c()};
  {
    // Exactly degenerate two-state model space.
    Instance d;
    d.spectrum = diagonal_spectrum({0.0, 0.0, 1.0, 1.5, 2.0});
    d.model = make_model_space(d.spectrum, {0, 1});
    Mat<real> w(5, 5);
    w << 0.02, 0.03, 0.1, -0.05, 0.04,
         0.03, -0.01, 0.07, 0.08, -0.06,
         0.1, 0.07, 0.0, 0.02, 0.01,
         -0.05, 0.08, 0.02, 0.03, 0.05,
         0.04, -0.06, 0.01, 0.05, -0.02;
    d.potential = EnergyDependentPotential(5, {ConstantTerm{w}});
    cases.push_back(std::move(d));
  }
  for (const RandomInstance& in : random_ensemble(ensemble_options(opts))) {
    if (cases.size() >= 13) break;
    Instance c{in.spectrum, in.model, EnergyDependentPotential(in.spectrum.size())};
    c.potential.add(std::get<ConstantTerm>(in.potential.terms().front()));
    cases.push_back(std::move(c));
  }

  double msc = 0.0, bloch = 0.0, diag = 0.0;
  std::ostringstream os;
  try {
    for (const Instance& c : cases) {
      const ExpansionLedger<real> l = expand<real>(c.spectrum, c.model, c.potential, 3);
      const ExpansionLedger<real> b = bloch_iterate<real>(c.spectrum, c.model, c.potential, 3);
      msc = std::max(msc, max_abs(l.orders.at(2).heff_msc));
      for (int n = 1; n <= 3; ++n)
        bloch = std::max({bloch, max_abs(l.orders.at(n).omega - b.orders.at(n).omega),
                          max_abs(l.orders.at(n).heff - b.orders.at(n).heff)});

      const std::vector<double> em = model_energies(c.spectrum, c.model);
      double gap = std::numeric_limits<double>::infinity();
      for (double e : em)
        for (std::size_t q : c.model.q) gap = std::min(gap, std::abs(e - c.spectrum.h0[q]));
      const double lo = *std::min_element(em.begin(), em.end()) - 0.4 * gap;
      const double hi = *std::max_element(em.begin(), em.end()) + 0.4 * gap;
      const EigenSystem<real> exact = eig_general<real>(h0_matrix<real>(c.spectrum) + evaluate(c.potential, 0.0));
      for (std::size_t m = 0; m < c.model.dim(); ++m) {
        if (c.model.degenerate_energy && m > 0) break;  // one branch scan covers a degenerate level
        const int br = branch_for_model_state(c.spectrum, c.model, c.potential, c.model.p[m], lo);
        const double e = solve_bs_state(c.spectrum, c.model, c.potential, br, lo, hi).energy;
        diag = std::max(diag, (exact.values.array() - e).abs().minCoeff());
      }
    }
    r.passed = msc == 0.0 && bloch <= 1e-12 && diag <= 1e-12;
    os << cases.size() << " constant-V cases; max |heff2 MSC| " << sci(msc) << " (need exactly 0); max |expand - "
       << "bloch_iterate| " << sci(bloch) << " (need <= 1e-12); max |solve_bs_state - diagonalization| "
       << sci(diag) << " (need <= 1e-12)";
  } catch (const Error& e) {
    os << "error: " << e.what();
  }
  r.detail = os.str();
  return r;
}

namespace {

// Two-state basis with pairs (r, s) and (t, u); element (0, 1) carries W = 1.
double photon_element(double e, Orbital rr, Orbital ss, Orbital tt, Orbital uu) {
  PhotonKernel k;
  k.grid = QuadratureGrid{{1.0}, {1.0}};
  k.profile = Profile{};
  k.coupling = Mat<real>::Zero(2, 2);
  k.coupling(0, 1) = 1.0;
  k.pairs = {OrbitalPair{rr, ss}, OrbitalPair{tt, uu}};
  const EnergyDependentPotential v(2, {PhotonTerm{k}});
  return evaluate<real>(v, e)(0, 1);
}

}  // namespace

CriterionResult check_photon_kernel() {
  CriterionResult r{7, "photon-kernel", false, ""};
  std::ostringstream os;
  try {
    const Orbital zero = make_orbital(0, 0.0);
    const double v1 = photon_element(0.0, zero, zero, zero, zero);
    const double v2 = photon_element(0.5, make_orbital(0, 0.1), make_orbital(1, 0.3), make_orbital(2, 0.4),
                                     make_orbital(3, 0.2));
    const double v3 = photon_element(0.0, make_orbital(0, -1.0), make_orbital(1, 0.2), make_orbital(2, 0.2),
                                     make_orbital(3, 0.5));
    const double x1 = -2.0, x2 = 1.0 / -0.8 + 1.0 / -1.2, x3 = 1.0 / 1.5 - 1.0 / 1.4;
    const double spot = std::max({std::abs(v1 - x1), std::abs(v2 - x2), std::abs(v3 - x3)});

    // All four orbital energies equal, E = 2 eps: -2 sum w g(k)/k W.
    const double eps = 0.3;
    const QuadratureGrid grid = gauss_legendre(20, 0.5, 6.0);
    const Profile g{Profile::Form::lorentzian, 1.3, 2.0, 0.7};
    Mat<real> w(2, 2);
    w << 0.4, -0.25, -0.25, 0.9;
    PhotonKernel k{grid, g, w, 0.0, {OrbitalPair{make_orbital(0, eps), make_orbital(1, eps)},
                                     OrbitalPair{make_orbital(2, eps), make_orbital(3, eps)}}};
    const EnergyDependentPotential v(2, {PhotonTerm{k}});
    double sum = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) sum += grid.weights[i] * g(grid.nodes[i]) / grid.nodes[i];
    const double closed = max_abs(evaluate<real>(v, 2.0 * eps) - (-2.0 * sum) * w);

    r.passed = spot <= 1e-12 && closed <= 1e-12;
    char buf[200];
    std::snprintf(buf, sizeof buf, "values %.15f, %.15f, %.15f; worst spot error %s; closed form error %s",
                  v1, v2, v3, sci(spot).c_str(), sci(closed).c_str());
    os << buf << " (need <= 1e-12)";
  } catch (const Error& e) {
    os << "error: " << e.what();
  }
  r.detail = os.str();
  return r;
}

CriterionResult check_normalization(const AcceptanceOptions& opts) {
  CriterionResult r{8, "normalization", false, ""};
  double worst = 0.0;
  std::size_t iterates = 0;
  std::ostringstream os;
  auto p_block = [](const Mat<real>& omega, const ModelSpace& P) {
    Mat<real> out(static_cast<Eigen::Index>(P.dim()), omega.cols());
    for (std::size_t m = 0; m < P.dim(); ++m)
      out.row(static_cast<Eigen::Index>(m)) = omega.row(static_cast<Eigen::Index>(P.p[m]));
    return out;
  };
  auto check = [&](const Spectrum& s, const ModelSpace& P, const EnergyDependentPotential& v, double lo,
                   double hi) {
    const BsBlochState<real> st = bs_bloch_solve<real>(s, P, v);
    for (const BsBlochStep& step : st.trace) worst = std::max(worst, step.normalization_error);
    iterates += st.trace.size();
    const auto d = static_cast<Eigen::Index>(P.dim());
    const Mat<real> id = Mat<real>::Identity(d, d);
    worst = std::max(worst, max_abs(p_block(st.omega.block, P) - id));
    worst = std::max(worst, max_abs(p_block(expand<real>(s, P, v, 3).omega().block, P) - id));
    if (v.energy_independent())
      worst = std::max(worst, max_abs(p_block(bloch_iterate<real>(s, P, v, 3).omega().block, P) - id));
    for (Eigen::Index a = 0; a < st.energies.size(); ++a)
      worst = std::max(worst, max_abs(p_block(omega_bar<real>(s, P, v, st.energies[a]).block, P) - id));
    for (std::size_t m = 0; m < P.dim(); ++m) {
      const int br = branch_for_model_state(s, P, v, P.p[m], lo);
      const BranchSolveReport rep = solve_bs_state(s, P, v, br, lo, hi);
      worst = std::max(worst, max_abs(p_block(rep.wave_column, P) - rep.model_vector));
      ++iterates;
    }
  };
  try {
    for (const Instance& t : {toy_a(), toy_b(), toy_c(), quasi_degenerate(1e-2), quasi_degenerate(1e-4)}) {
      const std::vector<double> em = model_energies(t.spectrum, t.model);
      double gap = std::numeric_limits<double>::infinity();
      for (double e : em)
        for (std::size_t q : t.model.q) gap = std::min(gap, std::abs(e - t.spectrum.h0[q]));
      const double half = std::isfinite(gap) ? 0.4 * gap : 0.5;
      check(t.spectrum, t.model, t.potential, *std::min_element(em.begin(), em.end()) - half,
            *std::max_element(em.begin(), em.end()) + half);
    }
    for (const RandomInstance& in : random_ensemble(ensemble_options(opts)))
      check(in.spectrum, in.model, in.potential, in.lo, in.hi);
    r.passed = worst <= 1e-12;
    os << iterates << " iterates and solutions checked; max |P Omega P - P| " << sci(worst) << " (need <= 1e-12)";
  } catch (const Error& e) {
    os << "error: " << e.what();
  }
  r.detail = os.str();
  return r;
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts) {
  return {check_oracle_equivalence(opts),      check_rs_bw_bridge(opts),
          check_closed_form_fixed_points(),    check_counterterm_continuity(),
          check_difference_ratio_limits(),     check_energy_independent_limit(opts),
          check_photon_kernel(),               check_normalization(opts)};
}

std::string format_result(const CriterionResult& r) {
  std::ostringstream os;
  os << (r.passed ? "PASS" : "FAIL") << "  " << r.id << " " << r.name << "  " << r.detail;
  return os.str();
}

}  // namespace bsbloch
