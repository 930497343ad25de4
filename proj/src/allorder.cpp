#include "bsbloch/allorder.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <optional>
#include <sstream>

namespace bsbloch {

namespace {

template <typename Scalar>
void reimpose_normalization(Mat<Scalar>& omega, const ModelSpace& P) {
  for (std::size_t m = 0; m < P.dim(); ++m)
    for (std::size_t mp = 0; mp < P.dim(); ++mp)
      omega(static_cast<Eigen::Index>(P.p[mp]), static_cast<Eigen::Index>(m)) =
          Scalar(m == mp ? 1.0 : 0.0);
}

template <typename Scalar>
double normalization_error(const Mat<Scalar>& omega, const ModelSpace& P) {
  double worst = 0.0;
  for (std::size_t m = 0; m < P.dim(); ++m)
    for (std::size_t mp = 0; mp < P.dim(); ++mp) {
      const Scalar x = omega(static_cast<Eigen::Index>(P.p[mp]), static_cast<Eigen::Index>(m));
      worst = std::max(worst, std::abs(x - Scalar(m == mp ? 1.0 : 0.0)));
    }
  return worst;
}

template <typename Scalar>
Mat<Scalar> model_rows(const Mat<Scalar>& a, const ModelSpace& P) {
  Mat<Scalar> out(static_cast<Eigen::Index>(P.dim()), a.cols());
  for (std::size_t m = 0; m < P.dim(); ++m)
    out.row(static_cast<Eigen::Index>(m)) = a.row(static_cast<Eigen::Index>(P.p[m]));
  return out;
}

}  // namespace

template <typename Scalar>
WaveOperator<Scalar> omega_bar(const Spectrum& s, const ModelSpace& P,
                               const EnergyDependentPotential& v, Scalar e) {
  const auto n = static_cast<Eigen::Index>(s.size());
  const Vec<Scalar> g = reduced_resolvent_diagonal(s, P, e);
  const Mat<Scalar> a = Mat<Scalar>::Identity(n, n) - g.asDiagonal() * evaluate(v, e);
  Mat<Scalar> x;
  try {
    x = solve_linear(a, model_injection<Scalar>(s, P));
  } catch (const Error& err) {
    if (err.kind() != ErrorKind::Singular) throw;
    std::ostringstream msg;
    msg << "omega_bar: 1 - Gamma_Q V singular at E = " << e << " (Q-space resonance)";
    throw Error(ErrorKind::Singular, msg.str());
  }
  reimpose_normalization(x, P);
  return {x};
}

template <typename Scalar>
Mat<Scalar> heff_bar(const Spectrum& s, const ModelSpace& P, const EnergyDependentPotential& v,
                     Scalar e) {
  return model_rows<Scalar>(evaluate(v, e) * omega_bar(s, P, v, e).block, P);
}

namespace {

// V(E) with the couplings of excluded Q states removed, so that those states
// decouple exactly as they do in the reduced resolvent.
template <typename Scalar>
Mat<Scalar> projected_potential(const Spectrum& s, const ModelSpace& P, const EnergyDependentPotential& v,
                                Scalar e) {
  Mat<Scalar> m = evaluate(v, e);
  if (!P.exclude_negative_energy_q) return m;
  for (std::size_t i : P.q)
    if (excluded_state(s, P, i)) {
      m.row(static_cast<Eigen::Index>(i)).setZero();
      m.col(static_cast<Eigen::Index>(i)).setZero();
    }
  return m;
}

struct BranchPoint {
  double energy = 0.0;
  double value = 0.0;  // g(E)
  Vec<real> vector;    // unit right eigenvector
  double overlap = 1.0;
};

EigenSystem<real> full_system(const Spectrum& s, const ModelSpace& P, const EnergyDependentPotential& v,
                              double e) {
  return eig_general<real>(h0_matrix<real>(s) + projected_potential(s, P, v, e));
}

BranchPoint follow(const Spectrum& s, const ModelSpace& P, const EnergyDependentPotential& v, double e,
                   const Vec<real>& reference) {
  const EigenSystem<real> sys = full_system(s, P, v, e);
  Eigen::Index best = 0;
  const Vec<real> overlaps = (sys.right.transpose() * reference).cwiseAbs();
  overlaps.maxCoeff(&best);
  BranchPoint pt{e, sys.values[best], sys.right.col(best), overlaps[best]};
  if (pt.vector.dot(reference) < 0.0) pt.vector = -pt.vector;
  return pt;
}

}  // namespace

int branch_for_model_state(const Spectrum& s, const ModelSpace& P, const EnergyDependentPotential& v,
                           std::size_t basis_index, double energy) {
  if (basis_index >= s.size()) throw Error(ErrorKind::Invalid, "branch_for_model_state: bad index");
  const EigenSystem<real> sys = full_system(s, P, v, energy);
  Eigen::Index best = 0;
  sys.right.row(static_cast<Eigen::Index>(basis_index)).cwiseAbs().maxCoeff(&best);
  return static_cast<int>(best);
}

BranchSolveReport solve_bs_state(const Spectrum& s, const ModelSpace& P,
                                 const EnergyDependentPotential& v, int branch, double lo,
                                 double hi, const BranchOptions& opts) {
  if (!(hi > lo)) throw Error(ErrorKind::BadRange, "solve_bs_state: bracket must satisfy lo < hi");
  if (branch < 0 || static_cast<std::size_t>(branch) >= s.size())
    throw Error(ErrorKind::Invalid, "solve_bs_state: branch index out of range");
  if (opts.scan_points < 2) throw Error(ErrorKind::Invalid, "solve_bs_state: need >= 2 scan points");

  auto step = [&](double e, const BranchPoint& prev) {
    BranchPoint next = follow(s, P, v, e, prev.vector);
    if (next.overlap < opts.min_overlap) {
      std::ostringstream msg;
      msg << "solve_bs_state: eigenvector overlap " << next.overlap << " below "
          << opts.min_overlap << " at E = " << e;
      throw Error(ErrorKind::BranchJump, msg.str());
    }
    return next;
  };

  BranchPoint a;
  {
    const EigenSystem<real> sys = full_system(s, P, v, lo);
    a = BranchPoint{lo, sys.values[branch], sys.right.col(branch), 1.0};
  }
  double fa = a.value - a.energy;

  std::optional<BranchPoint> root;
  int iterations = 0;
  if (fa == 0.0) root = a;
  for (int i = 1; i < opts.scan_points && !root; ++i) {
    const double e = lo + (hi - lo) * i / (opts.scan_points - 1);
    BranchPoint b = step(e, a);
    const double fb = b.value - b.energy;
    if (fb == 0.0) {
      root = b;
      break;
    }
    if ((fa < 0.0) != (fb < 0.0)) {
      // Illinois-modified regula falsi, bisection when the secant step leaves the bracket.
      double ga = fa, gb = fb;
      int side = 0;
      BranchPoint lo_pt = a, hi_pt = b;
      for (iterations = 1; iterations <= opts.max_iterations; ++iterations) {
        double c = hi_pt.energy - gb * (hi_pt.energy - lo_pt.energy) / (gb - ga);
        if (!(c > lo_pt.energy && c < hi_pt.energy)) c = 0.5 * (lo_pt.energy + hi_pt.energy);
        BranchPoint mid = step(c, lo_pt);
        const double fc = mid.value - c;
        const double scale = 1.0 + std::abs(c);
        if (std::abs(fc) <= opts.tolerance * scale ||
            hi_pt.energy - lo_pt.energy <= 4.0 * std::numeric_limits<double>::epsilon() * scale) {
          root = mid;
          break;
        }
        if ((fc < 0.0) == (gb < 0.0)) {
          hi_pt = mid;
          gb = fc;
          if (side == -1) ga *= 0.5;
          side = -1;
        } else {
          lo_pt = mid;
          ga = fc;
          if (side == +1) gb *= 0.5;
          side = +1;
        }
      }
      if (!root) throw Error(ErrorKind::NoRoot, "solve_bs_state: refinement did not converge");
      break;
    }
    a = b;
    fa = fb;
  }
  if (!root) {
    std::ostringstream msg;
    msg << "solve_bs_state: no sign change of g(E) - E for branch " << branch << " in [" << lo
        << ", " << hi << "]";
    throw Error(ErrorKind::NoRoot, msg.str());
  }

  BranchSolveReport rep;
  rep.branch = branch;
  rep.energy = root->energy;
  rep.iterations = iterations;
  rep.residual = std::abs(root->value - root->energy);

  Vec<real> psi0(static_cast<Eigen::Index>(P.dim()));
  for (std::size_t m = 0; m < P.dim(); ++m)
    psi0[static_cast<Eigen::Index>(m)] = root->vector[static_cast<Eigen::Index>(P.p[m])];
  const double norm = psi0.norm();
  if (norm < 1e-8)
    throw Error(ErrorKind::Invalid, "solve_bs_state: branch has no weight in the model space");
  Eigen::Index imax = 0;
  psi0.cwiseAbs().maxCoeff(&imax);
  psi0 /= (psi0[imax] < 0 ? -norm : norm);
  rep.model_vector = psi0;
  rep.wave_column = omega_bar<real>(s, P, v, rep.energy).block * psi0;
  return rep;
}

template <typename Scalar>
BsBlochState<Scalar> bs_bloch_solve(const Spectrum& s, const ModelSpace& P,
                                    const EnergyDependentPotential& v,
                                    const BsBlochOptions& opts) {
  if (v.dim() != s.size()) throw Error(ErrorKind::Invalid, "bs_bloch_solve: size mismatch");
  if (!(opts.mixing > 0.0 && opts.mixing <= 1.0))
    throw Error(ErrorKind::Invalid, "bs_bloch_solve: mixing must be in (0, 1]");

  const auto n = static_cast<Eigen::Index>(s.size());
  const auto d = static_cast<Eigen::Index>(P.dim());
  const std::vector<double> em = model_energies(s, P);

  // (E_m - e_q)^-1 on the allowed Q rows.
  Mat<Scalar> denom = Mat<Scalar>::Zero(n, d);
  for (Eigen::Index m = 0; m < d; ++m) {
    const Vec<Scalar> g = reduced_resolvent_diagonal(s, P, Scalar(em[static_cast<std::size_t>(m)]));
    for (std::size_t q : P.q) {
      const double gap = std::abs(em[static_cast<std::size_t>(m)] - s.h0[q]);
      if (gap < opts.gap_floor && g[static_cast<Eigen::Index>(q)] != Scalar(0)) {
        std::ostringstream msg;
        msg << "bs_bloch_solve: P-Q gap " << gap << " below floor " << opts.gap_floor
            << " (model column " << m << ", state " << q << ")";
        throw Error(ErrorKind::PoleHit, msg.str());
      }
    }
    denom.col(m) = g;
  }

  const Mat<Scalar> h0p = model_h0<Scalar>(s, P);
  Mat<Scalar> omega = model_injection<Scalar>(s, P);
  Mat<Scalar> hint = Mat<Scalar>::Zero(d, d);

  BsBlochState<Scalar> st;
  double eta = opts.mixing;
  double prev = std::numeric_limits<double>::infinity();
  std::vector<double> history;
  bool converged = false;

  for (int it = 1; it <= opts.max_iterations; ++it) {
    const Mat<Scalar> a = apply_function_of_heff<Scalar>(v, h0p + hint, omega);
    const Mat<Scalar> hint_new = model_rows<Scalar>(a, P);
    const Mat<Scalar> b = apply_function_of_heff<Scalar>(v, h0p + hint_new, omega);
    Mat<Scalar> omega_new = denom.cwiseProduct(b - omega * hint_new);
    reimpose_normalization(omega_new, P);

    BsBlochStep stepinfo;
    stepinfo.delta_omega = max_abs(omega_new - omega);
    stepinfo.delta_heff = max_abs(hint_new - hint);
    stepinfo.mixing = eta;
    const double res = std::max(stepinfo.delta_omega, stepinfo.delta_heff);
    if (!std::isfinite(res))
      throw Error(ErrorKind::Diverged, "bs_bloch_solve: non-finite iterate at step " + std::to_string(it));

    st.iterations = it;
    if (res < opts.tolerance) {
      omega = omega_new;
      hint = hint_new;
      stepinfo.normalization_error = normalization_error(omega, P);
      st.trace.push_back(stepinfo);
      converged = true;
      break;
    }
    if (res > prev && res > 1e3 * opts.tolerance) eta = std::max(0.5 * eta, opts.min_mixing);
    prev = res;
    history.push_back(res);
    const std::size_t w = static_cast<std::size_t>(opts.divergence_window);
    if (history.size() > w && res > 10.0 * history[history.size() - 1 - w] && res > 1e-6) {
      std::ostringstream msg;
      msg << "bs_bloch_solve: residual grew from " << history[history.size() - 1 - w] << " to "
          << res << " over " << w << " steps";
      throw Error(ErrorKind::Diverged, msg.str());
    }

    omega = Scalar(1.0 - eta) * omega + Scalar(eta) * omega_new;
    hint = Scalar(1.0 - eta) * hint + Scalar(eta) * hint_new;
    reimpose_normalization(omega, P);
    stepinfo.normalization_error = normalization_error(omega, P);
    st.trace.push_back(stepinfo);
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "bs_bloch_solve: no convergence in " << opts.max_iterations << " steps (last residual "
        << prev << ")";
    throw Error(ErrorKind::Diverged, msg.str());
  }

  st.omega = {omega};
  st.heff = {h0p, hint};
  const EigenSystem<Scalar> eig = eig_general<Scalar>(st.heff.matrix());
  st.energies = eig.values;
  st.right = eig.right;
  st.left = eig.left;
  const Mat<Scalar> h0 = h0_matrix<Scalar>(s);
  for (Eigen::Index a = 0; a < eig.size(); ++a) {
    const Scalar e = eig.values[a];
    const Vec<Scalar> psi = omega * eig.right.col(a);
    const Mat<Scalar> lhs = e * Mat<Scalar>::Identity(n, n) - h0 - projected_potential(s, P, v, e);
    st.bs_residuals.push_back((lhs * psi).norm());
  }
  return st;
}

template WaveOperator<real> omega_bar<real>(const Spectrum&, const ModelSpace&,
                                            const EnergyDependentPotential&, real);
template WaveOperator<cplx> omega_bar<cplx>(const Spectrum&, const ModelSpace&,
                                            const EnergyDependentPotential&, cplx);
template Mat<real> heff_bar<real>(const Spectrum&, const ModelSpace&,
                                  const EnergyDependentPotential&, real);
template Mat<cplx> heff_bar<cplx>(const Spectrum&, const ModelSpace&,
                                  const EnergyDependentPotential&, cplx);
template BsBlochState<real> bs_bloch_solve<real>(const Spectrum&, const ModelSpace&,
                                                 const EnergyDependentPotential&,
                                                 const BsBlochOptions&);
template BsBlochState<cplx> bs_bloch_solve<cplx>(const Spectrum&, const ModelSpace&,
                                                 const EnergyDependentPotential&,
                                                 const BsBlochOptions&);

namespace {

// Greedy assignment of branches at the next node by largest |overlap|.
std::vector<Eigen::Index> match_branches(const Mat<real>& prev, const Mat<real>& next) {
  const Eigen::Index n = prev.cols();
  Mat<real> overlap = (prev.transpose() * next).cwiseAbs();
  std::vector<Eigen::Index> assign(static_cast<std::size_t>(n), -1);
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index i = 0, j = 0;
    overlap.maxCoeff(&i, &j);
    assign[static_cast<std::size_t>(i)] = j;
    overlap.row(i).setConstant(-1.0);
    overlap.col(j).setConstant(-1.0);
  }
  return assign;
}

}  // namespace

std::vector<OracleRoot> oracle_scan(const Spectrum& s, const ModelSpace& P,
                                    const EnergyDependentPotential& v, double lo, double hi,
                                    int n_grid, int jobs) {
  if (!(hi > lo)) throw Error(ErrorKind::BadRange, "oracle_scan: range must satisfy lo < hi");
  if (n_grid < 2) throw Error(ErrorKind::Invalid, "oracle_scan: need >= 2 grid points");

  const auto grid_size = static_cast<std::size_t>(n_grid);
  std::vector<double> grid(grid_size);
  for (std::size_t i = 0; i < grid_size; ++i)
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_grid - 1);

  // Node spectra, computed in parallel and merged by node index.
  std::vector<std::optional<EigenSystem<real>>> nodes(grid_size);
  auto evaluate_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        nodes[i] = full_system(s, P, v, grid[i]);
      } catch (const Error&) {
        nodes[i].reset();
      }
    }
  };
  const std::size_t workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1) {
    evaluate_range(0, grid_size);
  } else {
    std::vector<std::future<void>> tasks;
    const std::size_t chunk = (grid_size + workers - 1) / workers;
    for (std::size_t b = 0; b < grid_size; b += chunk)
      tasks.push_back(std::async(std::launch::async, evaluate_range, b, std::min(grid_size, b + chunk)));
    for (auto& t : tasks) t.get();
  }

  std::vector<OracleRoot> roots;
  auto refine = [&](double a_e, double b_e, double fa, const Vec<real>& ref, int label) {
    Vec<real> reference = ref;
    for (int it = 0; it < 200 && b_e - a_e > 1e-13 * (1.0 + std::abs(a_e)); ++it) {
      const double c = 0.5 * (a_e + b_e);
      BranchPoint mid;
      try {
        mid = follow(s, P, v, c, reference);
      } catch (const Error&) {
        return;
      }
      const double fc = mid.value - c;
      if ((fc < 0.0) == (fa < 0.0)) {
        a_e = c;
        fa = fc;
        reference = mid.vector;
      } else {
        b_e = c;
      }
    }
    const double e = 0.5 * (a_e + b_e);
    try {
      const BranchPoint fin = follow(s, P, v, e, reference);
      const double residual = std::abs(fin.value - e);
      // Sign changes across a pole of V are not roots.
      if (residual <= 1e-9 * (1.0 + std::abs(e))) roots.push_back({e, label, residual});
    } catch (const Error&) {
    }
  };

  // labels[k] = column of the current node's eigensystem carrying branch k.
  std::vector<Eigen::Index> labels;
  for (std::size_t i = 0; i < grid_size; ++i) {
    if (!nodes[i]) {
      labels.clear();
      continue;
    }
    const EigenSystem<real>& cur = *nodes[i];
    const Eigen::Index n = cur.size();
    if (labels.empty()) {
      labels.resize(static_cast<std::size_t>(n));
      for (Eigen::Index k = 0; k < n; ++k) {
        labels[static_cast<std::size_t>(k)] = k;
        if (cur.values[k] == grid[i]) roots.push_back({grid[i], static_cast<int>(k), 0.0});
      }
      continue;
    }
    const EigenSystem<real>& prev = *nodes[i - 1];
    const std::vector<Eigen::Index> next_of = match_branches(prev.right, cur.right);
    std::vector<Eigen::Index> next_labels(labels.size());
    for (std::size_t k = 0; k < labels.size(); ++k) {
      const Eigen::Index pa = labels[k];
      const Eigen::Index pb = next_of[static_cast<std::size_t>(pa)];
      next_labels[k] = pb;
      const double fa = prev.values[pa] - grid[i - 1];
      const double fb = cur.values[pb] - grid[i];
      if (fb == 0.0)
        roots.push_back({grid[i], static_cast<int>(k), 0.0});
      else if (fa != 0.0 && (fa < 0.0) != (fb < 0.0))
        refine(grid[i - 1], grid[i], fa, prev.right.col(pa), static_cast<int>(k));
    }
    labels = std::move(next_labels);
  }

  std::sort(roots.begin(), roots.end(),
            [](const OracleRoot& a, const OracleRoot& b) { return a.energy < b.energy; });
  std::vector<OracleRoot> unique;
  for (const OracleRoot& r : roots) {
    if (!unique.empty() && std::abs(r.energy - unique.back().energy) <= kRootDedup) {
      if (r.residual < unique.back().residual) unique.back() = r;
      continue;
    }
    unique.push_back(r);
  }
  return unique;
}

}  // namespace bsbloch
