#include "bsbloch/expansion.hpp"

#include <string>

namespace bsbloch {

namespace {

template <typename Scalar>
using MatJet = Jet<Mat<Scalar>>;

template <typename Scalar>
MatJet<Scalar> jet_mul(const MatJet<Scalar>& a, const MatJet<Scalar>& b, int order) {
  MatJet<Scalar> out;
  out.reserve(static_cast<std::size_t>(order) + 1);
  for (int c = 0; c <= order; ++c) {
    Mat<Scalar> sum = Mat<Scalar>::Zero(a[0].rows(), b[0].cols());
    for (int i = 0; i <= c; ++i)
      sum.noalias() += a[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(c - i)];
    out.push_back(std::move(sum));
  }
  return out;
}

template <typename Scalar>
void jet_add(MatJet<Scalar>& a, const MatJet<Scalar>& b) {
  for (std::size_t c = 0; c < a.size(); ++c) a[c] += b[c];
}

template <typename Scalar>
Mat<Scalar> select(const Mat<Scalar>& m, const std::vector<std::size_t>* rows,
                   const std::vector<std::size_t>* cols) {
  const auto nr = rows ? static_cast<Eigen::Index>(rows->size()) : m.rows();
  const auto nc = cols ? static_cast<Eigen::Index>(cols->size()) : m.cols();
  Mat<Scalar> out(nr, nc);
  for (Eigen::Index i = 0; i < nr; ++i)
    for (Eigen::Index j = 0; j < nc; ++j)
      out(i, j) = m(rows ? static_cast<Eigen::Index>((*rows)[static_cast<std::size_t>(i)]) : i,
                    cols ? static_cast<Eigen::Index>((*cols)[static_cast<std::size_t>(j)]) : j);
  return out;
}

void check_order(int n) {
  if (n < 1 || n > RsExpansion<real>::kMaxOrder)
    throw Error(ErrorKind::Invalid, "expansion: order must be in 1..3, got " + std::to_string(n));
}

}  // namespace

template <typename Scalar>
WaveOperator<Scalar> ExpansionLedger<Scalar>::omega(int through) const {
  Mat<Scalar> total = injection;
  for (const auto& [n, terms] : orders)
    if (through < 0 || n <= through) total += terms.omega;
  return {total};
}

template <typename Scalar>
EffectiveHamiltonian<Scalar> ExpansionLedger<Scalar>::heff(int through) const {
  Mat<Scalar> total = Mat<Scalar>::Zero(model_h0.rows(), model_h0.cols());
  for (const auto& [n, terms] : orders)
    if (through < 0 || n <= through) total += terms.heff;
  return {model_h0, total};
}

template <typename Scalar>
RsExpansion<Scalar>::RsExpansion(const Spectrum& s, const ModelSpace& P,
                                 const EnergyDependentPotential& v)
    : s_(&s), P_(&P), v_(&v) {
  if (v.dim() != s.size()) throw Error(ErrorKind::Invalid, "expansion: potential/basis size mismatch");
  for (double e : model_energies(s, P)) energies_.push_back(Scalar(e));
}

template <typename Scalar>
MatJet<Scalar> RsExpansion<Scalar>::gamma_v(Scalar e, int order) const {
  const Vec<Scalar> g = reduced_resolvent_diagonal(*s_, *P_, e);
  const MatJet<Scalar> vj = taylor(*v_, e, order);
  // Taylor coefficients of Q/(E - e_q): (-1)^k / (E - e_q)^(k+1).
  MatJet<Scalar> gj;
  Vec<Scalar> power = g;
  for (int k = 0; k <= order; ++k) {
    gj.push_back(Mat<Scalar>(((k % 2) ? Scalar(-1) : Scalar(1)) * power.asDiagonal()));
    power = power.cwiseProduct(g);
  }
  return jet_mul(gj, vj, order);
}

template <typename Scalar>
MatJet<Scalar> RsExpansion<Scalar>::chain(int n, Scalar e, int order) const {
  const auto size = static_cast<Eigen::Index>(s_->size());
  if (n == 0) {
    MatJet<Scalar> id(static_cast<std::size_t>(order) + 1, Mat<Scalar>::Zero(size, size));
    id[0].setIdentity();
    return id;
  }
  const MatJet<Scalar> gv = gamma_v(e, order);
  MatJet<Scalar> out = gv;
  for (int i = 1; i < n; ++i) out = jet_mul(gv, out, order);
  return out;
}

template <typename Scalar>
MatJet<Scalar> RsExpansion<Scalar>::omega_bar(int n, Scalar e, int order) const {
  check_order(n);
  MatJet<Scalar> c = chain(n, e, order);
  for (auto& m : c) m = select<Scalar>(m, nullptr, &P_->p);
  return c;
}

template <typename Scalar>
MatJet<Scalar> RsExpansion<Scalar>::heff_bar(int n, Scalar e, int order) const {
  check_order(n);
  MatJet<Scalar> c = jet_mul(taylor(*v_, e, order), chain(n - 1, e, order), order);
  for (auto& m : c) m = select<Scalar>(m, &P_->p, &P_->p);
  return c;
}

template <typename Scalar>
typename RsExpansion<Scalar>::JetFn RsExpansion<Scalar>::bind(
    MatJet<Scalar> (RsExpansion::*fn)(int, Scalar, int) const, int n) const {
  return [this, fn, n](Scalar e, int order) { return (this->*fn)(n, e, order); };
}

template <typename Scalar>
MatJet<Scalar> RsExpansion<Scalar>::fold(const JetFn& a, const JetFn& b, Scalar e,
                                         int order) const {
  // Jets of `a` at the model energies and at e; the fold needs one order more
  // in e than it returns.
  std::vector<std::pair<Scalar, MatJet<Scalar>>> cache;
  cache.emplace_back(e, a(e, order + 1));
  auto jet_at = [&](Scalar x, int k) -> const MatJet<Scalar>& {
    for (auto& [pt, jet] : cache)
      if (pt == x && static_cast<int>(jet.size()) > k) return jet;
    cache.emplace_back(x, a(x, k));
    return cache.back().second;
  };

  const MatJet<Scalar> bj = b(e, order);
  MatJet<Scalar> out(static_cast<std::size_t>(order) + 1,
                     Mat<Scalar>::Zero(cache.front().second[0].rows(), bj[0].cols()));
  for (std::size_t j = 0; j < energies_.size(); ++j) {
    const Scalar ej = energies_[j];
    const auto col = static_cast<Eigen::Index>(j);
    auto column_jet = [&](Scalar x, int k) {
      const MatJet<Scalar>& full = jet_at(x, k);
      MatJet<Scalar> c;
      for (int i = 0; i <= k; ++i) c.push_back(full[static_cast<std::size_t>(i)].col(col));
      return c;
    };
    // Taylor coefficient c of E -> a[E_j, E] is a[E_j, E, ..., E] (c + 1 copies of E).
    MatJet<Scalar> ratio;
    for (int c = 0; c <= order; ++c) {
      std::vector<Scalar> pts(static_cast<std::size_t>(c) + 1, e);
      pts.push_back(ej);
      ratio.push_back(divided_difference<Scalar, Mat<Scalar>>(std::move(pts), column_jet));
    }
    for (int c = 0; c <= order; ++c)
      for (int i = 0; i <= c; ++i)
        out[static_cast<std::size_t>(c)].noalias() +=
            ratio[static_cast<std::size_t>(i)] * bj[static_cast<std::size_t>(c - i)].row(col);
  }
  return out;
}

template <typename Scalar>
MatJet<Scalar> RsExpansion<Scalar>::omega_msc(int n, Scalar e, int order) const {
  check_order(n);
  const auto rows = static_cast<Eigen::Index>(s_->size());
  const auto d = static_cast<Eigen::Index>(P_->dim());
  switch (n) {
    case 1: return MatJet<Scalar>(static_cast<std::size_t>(order) + 1, Mat<Scalar>::Zero(rows, d));
    case 2: return fold(bind(&RsExpansion::omega, 1), bind(&RsExpansion::heff, 1), e, order);
    default: {
      MatJet<Scalar> out =
          fold(bind(&RsExpansion::omega, 2), bind(&RsExpansion::heff, 1), e, order);
      jet_add(out, fold(bind(&RsExpansion::omega, 1), bind(&RsExpansion::heff_bar, 2), e, order));
      return out;
    }
  }
}

template <typename Scalar>
MatJet<Scalar> RsExpansion<Scalar>::heff_msc(int n, Scalar e, int order) const {
  check_order(n);
  const auto d = static_cast<Eigen::Index>(P_->dim());
  switch (n) {
    case 1: return MatJet<Scalar>(static_cast<std::size_t>(order) + 1, Mat<Scalar>::Zero(d, d));
    case 2: return fold(bind(&RsExpansion::heff, 1), bind(&RsExpansion::heff, 1), e, order);
    default: {
      MatJet<Scalar> out =
          fold(bind(&RsExpansion::heff, 1), bind(&RsExpansion::heff_bar, 2), e, order);
      jet_add(out, fold(bind(&RsExpansion::heff, 2), bind(&RsExpansion::heff, 1), e, order));
      return out;
    }
  }
}

template <typename Scalar>
MatJet<Scalar> RsExpansion<Scalar>::omega(int n, Scalar e, int order) const {
  MatJet<Scalar> out = omega_bar(n, e, order);
  if (n > 1) jet_add(out, omega_msc(n, e, order));
  return out;
}

template <typename Scalar>
MatJet<Scalar> RsExpansion<Scalar>::heff(int n, Scalar e, int order) const {
  MatJet<Scalar> out = heff_bar(n, e, order);
  if (n > 1) jet_add(out, heff_msc(n, e, order));
  return out;
}

template <typename Scalar>
Mat<Scalar> RsExpansion<Scalar>::on_shell(const JetFn& f) const {
  Mat<Scalar> out;
  for (std::size_t m = 0; m < energies_.size(); ++m) {
    const Mat<Scalar> value = f(energies_[m], 0)[0];
    if (m == 0) out.resize(value.rows(), static_cast<Eigen::Index>(energies_.size()));
    out.col(static_cast<Eigen::Index>(m)) = value.col(static_cast<Eigen::Index>(m));
  }
  if (!all_finite(out)) throw Error(ErrorKind::PoleHit, "expansion: non-finite ledger entry");
  return out;
}

template <typename Scalar>
OrderTerms<Scalar> RsExpansion<Scalar>::order_terms(int n) const {
  check_order(n);
  OrderTerms<Scalar> t;
  t.omega_msc = on_shell(bind(&RsExpansion::omega_msc, n));
  t.heff_msc = on_shell(bind(&RsExpansion::heff_msc, n));
  t.omega = on_shell(bind(&RsExpansion::omega_bar, n)) + t.omega_msc;
  t.heff = on_shell(bind(&RsExpansion::heff_bar, n)) + t.heff_msc;
  return t;
}

namespace {

template <typename Scalar>
void require_orders(const ExpansionLedger<Scalar>& ledger, int below, const char* op) {
  for (int n = 1; n < below; ++n)
    if (!ledger.has(n))
      throw Error(ErrorKind::Invalid, std::string(op) + ": ledger is missing order " +
                                          std::to_string(n));
}

}  // namespace

template <typename Scalar>
Mat<Scalar> omega1(const Spectrum& s, const ModelSpace& P, const EnergyDependentPotential& v) {
  const RsExpansion<Scalar> rs(s, P, v);
  return rs.order_terms(1).omega;
}

template <typename Scalar>
Mat<Scalar> heff1(const Spectrum& s, const ModelSpace& P, const EnergyDependentPotential& v) {
  const RsExpansion<Scalar> rs(s, P, v);
  return rs.order_terms(1).heff;
}

template <typename Scalar>
Mat<Scalar> omega2(const Spectrum& s, const ModelSpace& P, const EnergyDependentPotential& v,
                   const ExpansionLedger<Scalar>& ledger) {
  require_orders(ledger, 2, "omega2");
  return RsExpansion<Scalar>(s, P, v).order_terms(2).omega;
}

template <typename Scalar>
Mat<Scalar> heff2(const Spectrum& s, const ModelSpace& P, const EnergyDependentPotential& v,
                  const ExpansionLedger<Scalar>& ledger) {
  require_orders(ledger, 2, "heff2");
  return RsExpansion<Scalar>(s, P, v).order_terms(2).heff;
}

template <typename Scalar>
Mat<Scalar> omega3(const Spectrum& s, const ModelSpace& P, const EnergyDependentPotential& v,
                   const ExpansionLedger<Scalar>& ledger) {
  require_orders(ledger, 3, "omega3");
  return RsExpansion<Scalar>(s, P, v).order_terms(3).omega;
}

template <typename Scalar>
Mat<Scalar> heff3(const Spectrum& s, const ModelSpace& P, const EnergyDependentPotential& v,
                  const ExpansionLedger<Scalar>& ledger) {
  require_orders(ledger, 3, "heff3");
  return RsExpansion<Scalar>(s, P, v).order_terms(3).heff;
}

template <typename Scalar>
ExpansionLedger<Scalar> expand(const Spectrum& s, const ModelSpace& P,
                               const EnergyDependentPotential& v, int max_order) {
  check_order(max_order);
  const RsExpansion<Scalar> rs(s, P, v);
  ExpansionLedger<Scalar> ledger;
  ledger.injection = model_injection<Scalar>(s, P);
  ledger.model_h0 = model_h0<Scalar>(s, P);
  for (int n = 1; n <= max_order; ++n) ledger.orders[n] = rs.order_terms(n);
  return ledger;
}

template <typename Scalar>
ExpansionLedger<Scalar> bloch_iterate(const Spectrum& s, const ModelSpace& P,
                                      const EnergyDependentPotential& v, int max_order) {
  if (!v.energy_independent())
    throw Error(ErrorKind::Invalid, "bloch_iterate: potential must be energy independent");
  if (max_order < 1) throw Error(ErrorKind::Invalid, "bloch_iterate: max_order must be >= 1");
  if (v.dim() != s.size()) throw Error(ErrorKind::Invalid, "bloch_iterate: size mismatch");

  const Mat<Scalar> vmat = evaluate(v, Scalar(0));
  const std::vector<double> em = model_energies(s, P);
  const auto d = static_cast<Eigen::Index>(P.dim());

  // Gamma_Q(E_m) for each model column.
  std::vector<Vec<Scalar>> gammas;
  for (double e : em) gammas.push_back(reduced_resolvent_diagonal(s, P, Scalar(e)));

  ExpansionLedger<Scalar> ledger;
  ledger.injection = model_injection<Scalar>(s, P);
  ledger.model_h0 = model_h0<Scalar>(s, P);

  std::vector<Mat<Scalar>> omega{ledger.injection};
  std::vector<Mat<Scalar>> heff{Mat<Scalar>::Zero(d, d)};
  for (int n = 1; n <= max_order; ++n) {
    const Mat<Scalar> v_omega = vmat * omega.back();
    heff.push_back(select<Scalar>(v_omega, &P.p, nullptr));
    Mat<Scalar> folded = Mat<Scalar>::Zero(v_omega.rows(), d);
    for (int k = 1; k < n; ++k)
      folded.noalias() += omega[static_cast<std::size_t>(n - k)] * heff[static_cast<std::size_t>(k)];

    Mat<Scalar> next(v_omega.rows(), d), msc(v_omega.rows(), d);
    for (Eigen::Index m = 0; m < d; ++m) {
      const Vec<Scalar>& g = gammas[static_cast<std::size_t>(m)];
      next.col(m) = g.cwiseProduct(v_omega.col(m) - folded.col(m));
      msc.col(m) = -g.cwiseProduct(folded.col(m));
    }
    omega.push_back(next);

    OrderTerms<Scalar> t;
    t.omega = next;
    t.heff = heff.back();
    t.omega_msc = msc;
    t.heff_msc = Mat<Scalar>::Zero(d, d);
    if (!all_finite(t.omega) || !all_finite(t.heff))
      throw Error(ErrorKind::PoleHit, "bloch_iterate: non-finite order " + std::to_string(n));
    ledger.orders[n] = std::move(t);
  }
  return ledger;
}

#define BSBLOCH_INSTANTIATE(S)                                                                   \
  template struct ExpansionLedger<S>;                                                           \
  template class RsExpansion<S>;                                                                \
  template Mat<S> omega1<S>(const Spectrum&, const ModelSpace&, const EnergyDependentPotential&); \
  template Mat<S> heff1<S>(const Spectrum&, const ModelSpace&, const EnergyDependentPotential&);  \
  template Mat<S> omega2<S>(const Spectrum&, const ModelSpace&, const EnergyDependentPotential&,  \
                            const ExpansionLedger<S>&);                                         \
  template Mat<S> heff2<S>(const Spectrum&, const ModelSpace&, const EnergyDependentPotential&,   \
                           const ExpansionLedger<S>&);                                          \
  template Mat<S> omega3<S>(const Spectrum&, const ModelSpace&, const EnergyDependentPotential&,  \
                            const ExpansionLedger<S>&);                                         \
  template Mat<S> heff3<S>(const Spectrum&, const ModelSpace&, const EnergyDependentPotential&,   \
                           const ExpansionLedger<S>&);                                          \
  template ExpansionLedger<S> expand<S>(const Spectrum&, const ModelSpace&,                     \
                                        const EnergyDependentPotential&, int);                  \
  template ExpansionLedger<S> bloch_iterate<S>(const Spectrum&, const ModelSpace&,              \
                                               const EnergyDependentPotential&, int);

BSBLOCH_INSTANTIATE(real)
BSBLOCH_INSTANTIATE(cplx)
#undef BSBLOCH_INSTANTIATE

}  // namespace bsbloch
