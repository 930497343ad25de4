#include "bsbloch/scenario.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "bsbloch/acceptance.hpp"
#include "bsbloch/expansion.hpp"

namespace bsbloch {

using json = nlohmann::json;

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

std::string at(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}
std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) throw ConfigError(path, "number not finite");
  return x;
}

long long get_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  return j.get<long long>();
}

std::size_t get_index(const json& j, const std::string& path) {
  const long long v = get_integer(j, path);
  if (v < 0) throw ConfigError(path, "index must be >= 0");
  return static_cast<std::size_t>(v);
}

bool get_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
  return j.get<bool>();
}

std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key)) throw ConfigError(at(path, key), "missing");
  return obj.at(key);
}

std::vector<double> get_numbers(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_number(j[i], at(path, i)));
  return out;
}

std::pair<double, double> get_range(const json& j, const std::string& path) {
  const std::vector<double> r = get_numbers(j, path);
  if (r.size() != 2) throw ConfigError(path, "expected [lo, hi]");
  if (!(r[0] < r[1])) throw ConfigError(path, "range must satisfy lo < hi");
  return {r[0], r[1]};
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(at(path, it.key()), "unknown key");
  }
}

Mat<real> get_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array of rows");
  const std::size_t n = j.size();
  Mat<real> m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const std::vector<double> row = get_numbers(j[r], at(path, r));
    if (row.size() != n) throw ConfigError(at(path, r), "matrix must be square");
    for (std::size_t c = 0; c < n; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
  }
  return m;
}

// Coupling given as "matrix" or as sparse "entries" [[i, j, value], ...].
void get_coupling(const json& term, const std::string& path, TermSpec& c) {
  if (term.contains("symmetric")) c.symmetric = get_bool(term.at("symmetric"), at(path, "symmetric"));
  const bool has_m = term.contains("matrix"), has_e = term.contains("entries");
  if (has_m == has_e) throw ConfigError(path, "give exactly one of 'matrix' or 'entries'");
  if (has_m) {
    c.w = get_matrix(term.at("matrix"), at(path, "matrix"));
    if (c.symmetric)
      c.w.triangularView<Eigen::StrictlyLower>() = c.w.transpose().triangularView<Eigen::StrictlyLower>();
    return;
  }
  c.sparse = true;
  const json& e = term.at("entries");
  const std::string ep = at(path, "entries");
  if (!e.is_array()) throw ConfigError(ep, "expected an array of [i, j, value]");
  for (std::size_t k = 0; k < e.size(); ++k) {
    const std::string kp = at(ep, k);
    if (!e[k].is_array() || e[k].size() != 3) throw ConfigError(kp, "expected [i, j, value]");
    c.entries.push_back({get_index(e[k][0], at(kp, 0)), get_index(e[k][1], at(kp, 1)),
                         get_number(e[k][2], at(kp, 2))});
  }
}

std::vector<Orbital> get_orbitals(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty orbital list");
  std::vector<Orbital> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = at(path, i);
    if (j[i].is_number()) {
      out.push_back(make_orbital(static_cast<int>(i), get_number(j[i], p)));
      continue;
    }
    check_keys(j[i], {"energy", "sign"}, p);
    const double e = get_number(require(j[i], "energy", p), at(p, "energy"));
    if (j[i].contains("sign")) {
      const long long sign = get_integer(j[i].at("sign"), at(p, "sign"));
      if (sign != 1 && sign != -1) throw ConfigError(at(p, "sign"), "sign must be +1 or -1");
      out.push_back(make_orbital(static_cast<int>(i), e, static_cast<int>(sign)));
    } else {
      out.push_back(make_orbital(static_cast<int>(i), e));
    }
  }
  return out;
}

}  // namespace

ScenarioConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  check_keys(root, {"id", "spectrum", "model_space", "potential", "solver", "max_order",
                    "tolerances", "bracket", "oracle", "seed", "ensemble", "sweep"},
             "");
  ScenarioConfig c;
  if (root.contains("id")) c.id = get_string(root.at("id"), "id");
  if (c.id.empty() || c.id.find_first_of("/\\ ") != std::string::npos)
    throw ConfigError("id", "must be non-empty without spaces or slashes");
  if (root.contains("seed")) {
    const long long s = get_integer(root.at("seed"), "seed");
    if (s < 0) throw ConfigError("seed", "must be >= 0");
    c.seed = static_cast<std::uint64_t>(s);
  }
  if (root.contains("solver")) c.solver = get_string(root.at("solver"), "solver");
  if (c.solver != "expand" && c.solver != "bw" && c.solver != "bsbloch" && c.solver != "verify" &&
      c.solver != "sweep")
    throw ConfigError("solver", "expected expand | bw | bsbloch | verify | sweep");
  if (root.contains("max_order")) {
    c.max_order = static_cast<int>(get_integer(root.at("max_order"), "max_order"));
    if (c.max_order < 1 || c.max_order > 3) throw ConfigError("max_order", "must be 1, 2 or 3");
  }

  if (root.contains("ensemble")) {
    const json& e = root.at("ensemble");
    check_keys(e, {"coupling", "min_gap", "min_separation", "photon_nodes"}, "ensemble");
    EnsembleOptions eo;
    if (e.contains("coupling")) eo.coupling = get_number(e.at("coupling"), "ensemble.coupling");
    if (e.contains("min_gap")) eo.min_gap = get_number(e.at("min_gap"), "ensemble.min_gap");
    if (e.contains("min_separation"))
      eo.min_separation = get_number(e.at("min_separation"), "ensemble.min_separation");
    if (e.contains("photon_nodes"))
      eo.photon_nodes = static_cast<int>(get_integer(e.at("photon_nodes"), "ensemble.photon_nodes"));
    if (eo.photon_nodes < 1) throw ConfigError("ensemble.photon_nodes", "must be >= 1");
    c.ensemble = eo;
  }

  if (!c.ensemble && c.solver != "verify") {
    const json& sp = require(root, "spectrum", "");
    check_keys(sp, {"h0", "orbitals1", "orbitals2", "h0_matrix"}, "spectrum");
    const int kinds = int(sp.contains("h0")) + int(sp.contains("orbitals1") || sp.contains("orbitals2")) +
                      int(sp.contains("h0_matrix"));
    if (kinds != 1) throw ConfigError("spectrum", "give exactly one of h0, orbitals1/orbitals2, h0_matrix");
    if (sp.contains("h0")) {
      c.spectrum.kind = SpectrumSpec::Kind::diagonal;
      c.spectrum.h0 = get_numbers(sp.at("h0"), "spectrum.h0");
      if (c.spectrum.h0.empty()) throw ConfigError("spectrum.h0", "must be non-empty");
    } else if (sp.contains("h0_matrix")) {
      c.spectrum.kind = SpectrumSpec::Kind::matrix;
      c.spectrum.h0_matrix = get_matrix(sp.at("h0_matrix"), "spectrum.h0_matrix");
      if (!c.spectrum.h0_matrix.isApprox(c.spectrum.h0_matrix.transpose(), 1e-14))
        throw ConfigError("spectrum.h0_matrix", "must be symmetric");
    } else {
      c.spectrum.kind = SpectrumSpec::Kind::tensor;
      c.spectrum.orbitals1 = get_orbitals(require(sp, "orbitals1", "spectrum"), "spectrum.orbitals1");
      c.spectrum.orbitals2 = get_orbitals(require(sp, "orbitals2", "spectrum"), "spectrum.orbitals2");
    }

    const json& ms = require(root, "model_space", "");
    check_keys(ms, {"indices", "exclude_negative_energy_q"}, "model_space");
    const json& idx = require(ms, "indices", "model_space");
    if (!idx.is_array() || idx.empty()) throw ConfigError("model_space.indices", "expected a non-empty array");
    for (std::size_t i = 0; i < idx.size(); ++i)
      c.model.push_back(get_index(idx[i], at("model_space.indices", i)));
    if (ms.contains("exclude_negative_energy_q"))
      c.exclude_negative_energy_q =
          get_bool(ms.at("exclude_negative_energy_q"), "model_space.exclude_negative_energy_q");

    if (root.contains("potential")) {
      const json& pot = root.at("potential");
      if (!pot.is_array()) throw ConfigError("potential", "expected an array of terms");
      for (std::size_t i = 0; i < pot.size(); ++i) {
        const std::string p = at("potential", i);
        const json& t = pot[i];
        check_keys(t, {"type", "matrix", "entries", "symmetric", "pole", "power", "quadrature",
                       "profile", "gamma"},
                   p);
        TermSpec ts;
        const std::string type = get_string(require(t, "type", p), at(p, "type"));
        if (type == "constant") {
          ts.type = TermSpec::Type::constant;
        } else if (type == "rational") {
          ts.type = TermSpec::Type::rational;
          ts.pole = get_number(require(t, "pole", p), at(p, "pole"));
          if (t.contains("power")) ts.power = static_cast<int>(get_integer(t.at("power"), at(p, "power")));
          if (ts.power < 1) throw ConfigError(at(p, "power"), "must be >= 1");
        } else if (type == "photon") {
          ts.type = TermSpec::Type::photon;
          const json& q = require(t, "quadrature", p);
          const std::string qp = at(p, "quadrature");
          check_keys(q, {"nodes", "kmin", "kmax"}, qp);
          ts.quadrature.nodes = static_cast<int>(get_integer(require(q, "nodes", qp), at(qp, "nodes")));
          ts.quadrature.kmin = get_number(require(q, "kmin", qp), at(qp, "kmin"));
          ts.quadrature.kmax = get_number(require(q, "kmax", qp), at(qp, "kmax"));
          if (ts.quadrature.nodes < 1) throw ConfigError(at(qp, "nodes"), "must be >= 1");
          if (ts.quadrature.kmin < 0.0) throw ConfigError(at(qp, "kmin"), "must be >= 0");
          if (!(ts.quadrature.kmax > ts.quadrature.kmin)) throw ConfigError(at(qp, "kmax"), "must exceed kmin");
          if (t.contains("profile")) {
            const json& g = t.at("profile");
            const std::string gp = at(p, "profile");
            check_keys(g, {"form", "amplitude", "center", "width"}, gp);
            const std::string form = get_string(require(g, "form", gp), at(gp, "form"));
            if (form == "constant") ts.profile.form = Profile::Form::constant;
            else if (form == "gaussian") ts.profile.form = Profile::Form::gaussian;
            else if (form == "lorentzian") ts.profile.form = Profile::Form::lorentzian;
            else throw ConfigError(at(gp, "form"), "expected constant | gaussian | lorentzian");
            if (g.contains("amplitude")) ts.profile.amplitude = get_number(g.at("amplitude"), at(gp, "amplitude"));
            if (g.contains("center")) ts.profile.center = get_number(g.at("center"), at(gp, "center"));
            if (g.contains("width")) ts.profile.width = get_number(g.at("width"), at(gp, "width"));
            if (!(ts.profile.width > 0.0)) throw ConfigError(at(gp, "width"), "must be > 0");
          }
          if (t.contains("gamma")) ts.gamma = get_number(t.at("gamma"), at(p, "gamma"));
          if (ts.gamma < 0.0) throw ConfigError(at(p, "gamma"), "must be >= 0");
        } else {
          throw ConfigError(at(p, "type"), "expected constant | rational | photon");
        }
        get_coupling(t, p, ts);
        c.terms.push_back(std::move(ts));
      }
    }
  }

  if (root.contains("tolerances")) {
    const json& t = root.at("tolerances");
    check_keys(t, {"branch", "bloch", "max_iterations", "mixing", "min_mixing", "gap_floor",
                   "scan_points", "min_overlap"},
               "tolerances");
    auto positive = [&](const char* key, double& dst) {
      if (!t.contains(key)) return;
      dst = get_number(t.at(key), at("tolerances", key));
      if (!(dst > 0.0)) throw ConfigError(at("tolerances", key), "must be > 0");
    };
    positive("branch", c.branch.tolerance);
    positive("bloch", c.bloch.tolerance);
    positive("mixing", c.bloch.mixing);
    positive("min_mixing", c.bloch.min_mixing);
    positive("gap_floor", c.bloch.gap_floor);
    positive("min_overlap", c.branch.min_overlap);
    if (c.bloch.mixing > 1.0) throw ConfigError("tolerances.mixing", "must be <= 1");
    if (t.contains("max_iterations")) {
      const long long m = get_integer(t.at("max_iterations"), "tolerances.max_iterations");
      if (m < 1) throw ConfigError("tolerances.max_iterations", "must be >= 1");
      c.bloch.max_iterations = c.branch.max_iterations = static_cast<int>(m);
    }
    if (t.contains("scan_points")) {
      c.branch.scan_points = static_cast<int>(get_integer(t.at("scan_points"), "tolerances.scan_points"));
      if (c.branch.scan_points < 2) throw ConfigError("tolerances.scan_points", "must be >= 2");
    }
  }
  if (root.contains("bracket")) c.bracket = get_range(root.at("bracket"), "bracket");
  if (root.contains("oracle")) {
    const json& o = root.at("oracle");
    check_keys(o, {"enabled", "range", "grid"}, "oracle");
    if (o.contains("enabled")) c.oracle = get_bool(o.at("enabled"), "oracle.enabled");
    if (o.contains("range")) c.oracle_range = get_range(o.at("range"), "oracle.range");
    if (o.contains("grid")) {
      c.oracle_grid = static_cast<int>(get_integer(o.at("grid"), "oracle.grid"));
      if (c.oracle_grid < 2) throw ConfigError("oracle.grid", "must be >= 2");
    }
  }
  if (root.contains("sweep")) {
    const json& s = root.at("sweep");
    check_keys(s, {"parameter", "values", "solver"}, "sweep");
    SweepSpec sw;
    sw.parameter = get_string(require(s, "parameter", "sweep"), "sweep.parameter");
    if (sw.parameter != "coupling" && sw.parameter != "gap" && sw.parameter != "quadrature" &&
        sw.parameter != "gamma")
      throw ConfigError("sweep.parameter", "expected coupling | gap | quadrature | gamma");
    sw.values = get_numbers(require(s, "values", "sweep"), "sweep.values");
    if (s.contains("solver")) sw.solver = get_string(s.at("solver"), "sweep.solver");
    if (sw.solver != "expand" && sw.solver != "bw" && sw.solver != "bsbloch")
      throw ConfigError("sweep.solver", "expected expand | bw | bsbloch");
    c.sweep = sw;
  }
  if (c.solver == "sweep" && !c.sweep) throw ConfigError("sweep", "solver 'sweep' needs a sweep section");
  return c;
}

// ---------------------------------------------------------------------------
// Problem construction

namespace {

Mat<real> resolve_coupling(const TermSpec& t, std::size_t n, const std::string& path) {
  const auto nn = static_cast<Eigen::Index>(n);
  if (!t.sparse) {
    if (t.w.rows() != nn)
      throw ConfigError(path + ".matrix", "is " + std::to_string(t.w.rows()) + "x" +
                                              std::to_string(t.w.cols()) + ", basis size is " +
                                              std::to_string(n));
    return t.w;
  }
  Mat<real> w = Mat<real>::Zero(nn, nn);
  for (std::size_t k = 0; k < t.entries.size(); ++k) {
    const SparseEntry& e = t.entries[k];
    if (e.row >= n || e.col >= n)
      throw ConfigError(path + ".entries[" + std::to_string(k) + "]",
                        "index out of range for basis size " + std::to_string(n));
    const auto i = static_cast<Eigen::Index>(e.row), j = static_cast<Eigen::Index>(e.col);
    w(i, j) = e.value;
    if (t.symmetric) w(j, i) = e.value;
  }
  return w;
}

}  // namespace

Problem build_problem(const ScenarioConfig& c, std::uint64_t seed) {
  Problem pr;
  if (c.ensemble) {
    if (c.model_gap) throw ConfigError("sweep.parameter", "gap sweeps need an explicit spectrum");
    EnsembleOptions eo = *c.ensemble;
    if (c.quadrature_nodes) eo.photon_nodes = *c.quadrature_nodes;
    RandomInstance r = random_instance(seed, 0, eo);
    pr.spectrum = std::move(r.spectrum);
    pr.model = std::move(r.model);
    pr.potential = r.potential.scaled(c.coupling_scale);
    pr.lo = pr.oracle_lo = r.lo;
    pr.hi = pr.oracle_hi = r.hi;
    if (c.bracket) std::tie(pr.lo, pr.hi) = *c.bracket;
    if (c.oracle_range) std::tie(pr.oracle_lo, pr.oracle_hi) = *c.oracle_range;
    if (c.gamma && *c.gamma != 0.0)
      throw ConfigError("sweep.parameter", "gamma sweeps need explicit photon terms");
    return pr;
  }

  SpectrumSpec spec = c.spectrum;
  Mat<real> basis;  // columns: H0 eigenvectors, for h0_matrix input
  try {
    if (c.model_gap) {
      if (c.model.size() < 2) throw ConfigError("model_space.indices", "gap sweeps need d >= 2");
      if (spec.kind == SpectrumSpec::Kind::diagonal) {
        if (c.model[0] >= spec.h0.size() || c.model[1] >= spec.h0.size())
          throw ConfigError("model_space.indices", "index out of range");
        spec.h0[c.model[1]] = spec.h0[c.model[0]] + *c.model_gap;
      } else if (spec.kind == SpectrumSpec::Kind::tensor) {
        if (spec.orbitals2.size() < 2) throw ConfigError("spectrum.orbitals2", "gap sweeps need >= 2 orbitals");
        const Orbital& o0 = spec.orbitals2[0];
        Orbital& o1 = spec.orbitals2[1];
        const double e = o0.energy + *c.model_gap;
        o1 = o1.sign_overridden ? make_orbital(o1.index, e, o1.sign) : make_orbital(o1.index, e);
      } else {
        throw ConfigError("spectrum.h0_matrix", "gap sweeps need a diagonal or tensor spectrum");
      }
    }
    switch (spec.kind) {
      case SpectrumSpec::Kind::diagonal:
        pr.spectrum = diagonal_spectrum(spec.h0);
        break;
      case SpectrumSpec::Kind::tensor:
        pr.spectrum = tensor_h0(spec.orbitals1, spec.orbitals2);
        break;
      case SpectrumSpec::Kind::matrix: {
        Eigen::SelfAdjointEigenSolver<Mat<real>> es(spec.h0_matrix);
        if (es.info() != Eigen::Success) throw ConfigError("spectrum.h0_matrix", "diagonalization failed");
        basis = es.eigenvectors();
        const Vec<real> ev = es.eigenvalues();
        pr.spectrum = diagonal_spectrum(std::vector<double>(ev.data(), ev.data() + ev.size()));
        break;
      }
    }
  } catch (const Error& e) {
    throw ConfigError("spectrum", e.what());
  }

  const std::size_t n = pr.spectrum.size();
  for (std::size_t i = 0; i < c.model.size(); ++i)
    if (c.model[i] >= n)
      throw ConfigError("model_space.indices[" + std::to_string(i) + "]",
                        "index " + std::to_string(c.model[i]) + " >= basis size " + std::to_string(n));
  try {
    pr.model = make_model_space(pr.spectrum, c.model, c.exclude_negative_energy_q);
  } catch (const Error& e) {
    throw ConfigError("model_space.indices", e.what());
  }

  pr.potential = EnergyDependentPotential(n);
  for (std::size_t i = 0; i < c.terms.size(); ++i) {
    const std::string path = "potential[" + std::to_string(i) + "]";
    const TermSpec& t = c.terms[i];
    Mat<real> w = c.coupling_scale * resolve_coupling(t, n, path);
    if (basis.size() != 0) w = basis.transpose() * w * basis;
    try {
      switch (t.type) {
        case TermSpec::Type::constant:
          pr.potential.add(ConstantTerm{w});
          break;
        case TermSpec::Type::rational:
          pr.potential.add(RationalTerm{w, t.pole, t.power});
          break;
        case TermSpec::Type::photon: {
          if (!pr.spectrum.pairs)
            throw ConfigError(path, "photon terms need a tensor spectrum (orbitals1/orbitals2)");
          const int nodes = c.quadrature_nodes.value_or(t.quadrature.nodes);
          if (nodes < 1) throw ConfigError(path + ".quadrature.nodes", "must be >= 1");
          const double gamma = c.gamma.value_or(t.gamma);
          if (gamma < 0.0) throw ConfigError(path + ".gamma", "must be >= 0");
          pr.potential.add(make_photon_term(pr.spectrum,
                                            gauss_legendre(nodes, t.quadrature.kmin, t.quadrature.kmax),
                                            t.profile, w, gamma));
          break;
        }
      }
    } catch (const Error& e) {
      throw ConfigError(path, e.what());
    }
  }

  // Default bracket: halfway into the P-Q gap around the model energies.
  const std::vector<double> em = model_energies(pr.spectrum, pr.model);
  const double emin = *std::min_element(em.begin(), em.end());
  const double emax = *std::max_element(em.begin(), em.end());
  double gap = std::numeric_limits<double>::infinity();
  for (double e : em)
    for (std::size_t q : pr.model.q) gap = std::min(gap, std::abs(e - pr.spectrum.h0[q]));
  const double half = std::isfinite(gap) && gap > 0.0 ? 0.5 * gap : 0.5;
  pr.lo = pr.oracle_lo = emin - half;
  pr.hi = pr.oracle_hi = emax + half;
  if (c.bracket) std::tie(pr.lo, pr.hi) = *c.bracket;
  if (c.oracle_range)
    std::tie(pr.oracle_lo, pr.oracle_hi) = *c.oracle_range;
  else if (c.bracket)
    std::tie(pr.oracle_lo, pr.oracle_hi) = *c.bracket;
  return pr;
}

// ---------------------------------------------------------------------------
// Pipelines

namespace {

std::string header(const std::string& kind, const RunContext& ctx, const std::string& columns) {
  std::ostringstream os;
  os << "# " << kCsvVersion << " kind=" << kind << " config_sha256=" << ctx.config_hash
     << " seed=" << ctx.seed << "\n"
     << columns << "\n";
  return os.str();
}

std::string re(real x) { return format_number(x); }
std::string re(cplx x) { return format_number(x.real()); }
std::string im(real) { return format_number(0.0); }
std::string im(cplx x) { return format_number(x.imag()); }

const OracleRoot* nearest(const std::vector<OracleRoot>& roots, double e) {
  const OracleRoot* best = nullptr;
  for (const OracleRoot& r : roots)
    if (!best || std::abs(r.energy - e) < std::abs(best->energy - e)) best = &r;
  return best;
}

struct Section {
  std::string csv_rows;
  std::ostringstream text;
};

template <typename Scalar>
void expand_rows(const ScenarioConfig& c, const Problem& pr, Section& out) {
  const ExpansionLedger<Scalar> L = expand<Scalar>(pr.spectrum, pr.model, pr.potential, c.max_order);
  std::ostringstream rows;
  for (const auto& [n, t] : L.orders) {
    for (Eigen::Index i = 0; i < t.heff.rows(); ++i)
      for (Eigen::Index j = 0; j < t.heff.cols(); ++j)
        rows << c.id << "," << n << "," << i << "," << j << "," << re(t.heff(i, j)) << ","
             << im(t.heff(i, j)) << "," << re(t.heff_msc(i, j)) << "," << im(t.heff_msc(i, j)) << ","
             << format_number(t.omega.norm()) << "," << format_number(t.omega_msc.norm()) << "\n";
    out.text << "order " << n << ": |Omega^(n)| = " << format_number(t.omega.norm())
             << ", |MSC share of Omega^(n)| = " << format_number(t.omega_msc.norm())
             << ", max |H^(n)| = " << format_number(max_abs(t.heff))
             << ", max |MSC share of H^(n)| = " << format_number(max_abs(t.heff_msc)) << "\n";
  }
  const Mat<Scalar> h = L.heff().matrix();
  const EigenSystem<Scalar> eig = eig_general<Scalar>(h);
  out.text << "H_eff through order " << L.max_order() << " eigenvalues:";
  for (Eigen::Index a = 0; a < eig.size(); ++a) out.text << " " << re(eig.values[a]);
  out.text << "\n";
  out.csv_rows = rows.str();
}

template <typename Scalar>
void bsbloch_rows(const ScenarioConfig& c, const Problem& pr, const RunContext& ctx, Section& out) {
  const BsBlochState<Scalar> st = bs_bloch_solve<Scalar>(pr.spectrum, pr.model, pr.potential, c.bloch);
  std::vector<OracleRoot> roots;
  const bool oracle = c.oracle && !is_complex_v<Scalar>;
  if (oracle)
    roots = oracle_scan(pr.spectrum, pr.model, pr.potential, pr.oracle_lo, pr.oracle_hi, c.oracle_grid,
                        ctx.jobs);
  std::ostringstream rows;
  double worst_norm = 0.0;
  for (const BsBlochStep& s : st.trace) worst_norm = std::max(worst_norm, s.normalization_error);
  for (Eigen::Index a = 0; a < st.energies.size(); ++a) {
    const Scalar e = st.energies[a];
    rows << c.id << "," << a << "," << re(e) << "," << im(e) << "," << st.iterations << ","
         << format_number(st.bs_residuals[static_cast<std::size_t>(a)]) << ",";
    out.text << "eigenvalue " << a << ": E = " << re(e);
    if constexpr (is_complex_v<Scalar>)
      out.text << (std::imag(e) < 0 ? " - " : " + ") << format_number(std::abs(std::imag(e))) << "i";
    out.text << ", residual " << format_number(st.bs_residuals[static_cast<std::size_t>(a)]);
    const OracleRoot* r = oracle ? nearest(roots, std::real(e)) : nullptr;
    if (r) {
      const double diff = std::abs(std::real(e) - r->energy);
      rows << format_number(r->energy) << "," << format_number(diff) << "\n";
      out.text << ", oracle " << format_number(r->energy) << ", |diff| " << format_number(diff);
    } else {
      rows << ",\n";
      out.text << ", oracle n/a";
    }
    out.text << "\n";
  }
  out.text << "iterations: " << st.iterations << "\n";
  out.text << "max |P Omega P - P| over iterates: " << format_number(worst_norm) << "\n";
  out.text << "H_eff:\n";
  const Mat<Scalar> h = st.heff.matrix();
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    out.text << " ";
    for (Eigen::Index j = 0; j < h.cols(); ++j) {
      out.text << " " << re(h(i, j));
      if constexpr (is_complex_v<Scalar>) out.text << (std::imag(h(i, j)) < 0 ? "" : "+") << im(h(i, j)) << "i";
    }
    out.text << "\n";
  }
  out.csv_rows = rows.str();
}

void bw_rows(const ScenarioConfig& c, const Problem& pr, const RunContext& ctx, Section& out) {
  if (pr.potential.needs_complex())
    throw Error(ErrorKind::Invalid, "solve_bs_state: complex potentials (gamma > 0) need solver bsbloch");
  std::vector<OracleRoot> roots;
  if (c.oracle)
    roots = oracle_scan(pr.spectrum, pr.model, pr.potential, pr.oracle_lo, pr.oracle_hi, c.oracle_grid,
                        ctx.jobs);
  std::ostringstream rows;
  for (std::size_t m = 0; m < pr.model.dim(); ++m) {
    const int branch = branch_for_model_state(pr.spectrum, pr.model, pr.potential, pr.model.p[m], pr.lo);
    const BranchSolveReport r =
        solve_bs_state(pr.spectrum, pr.model, pr.potential, branch, pr.lo, pr.hi, c.branch);
    rows << c.id << "," << m << "," << r.branch << "," << format_number(r.energy) << "," << r.iterations
         << "," << format_number(r.residual) << ",";
    out.text << "model state " << m << " (basis " << pr.model.p[m] << "): E* = " << format_number(r.energy)
             << ", branch " << r.branch << ", iterations " << r.iterations << ", residual "
             << format_number(r.residual);
    if (const OracleRoot* o = c.oracle ? nearest(roots, r.energy) : nullptr) {
      const double diff = std::abs(r.energy - o->energy);
      rows << format_number(o->energy) << "," << format_number(diff) << "\n";
      out.text << ", oracle " << format_number(o->energy) << ", |diff| " << format_number(diff);
    } else {
      rows << ",\n";
      out.text << ", oracle n/a";
    }
    out.text << "\n";
  }
  if (c.oracle) {
    out.text << "oracle roots in [" << format_number(pr.oracle_lo) << ", " << format_number(pr.oracle_hi)
             << "]:";
    for (const OracleRoot& r : roots) out.text << " " << format_number(r.energy);
    out.text << "\n";
  }
  out.csv_rows = rows.str();
}

const char* kExpandColumns =
    "scenario,order,row,col,heff_re,heff_im,heff_msc_re,heff_msc_im,omega_norm,omega_msc_norm";
const char* kBwColumns = "scenario,model_state,branch,energy,iterations,residual,oracle_energy,oracle_diff";
const char* kBsBlochColumns =
    "scenario,index,energy_re,energy_im,iterations,bs_residual,oracle_energy,oracle_diff";

std::string summary_head(const std::string& command, const ScenarioConfig* c, const RunContext& ctx) {
  std::ostringstream os;
  os << "bsbloch summary v1\n";
  os << "command: " << command << "\n";
  if (c) os << "scenario: " << c->id << "\nsolver: " << c->solver << "\n";
  os << "config_sha256: " << ctx.config_hash << "\n";
  os << "seed: " << ctx.seed << "\n";
  return os.str();
}

int exit_code_for(const Error&) { return kExitSolver; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

Report run_scenario(const ScenarioConfig& c, const RunContext& ctx) {
  if (c.solver == "verify") return run_verify(ctx);
  if (c.solver == "sweep") return run_sweep(c, ctx);
  const auto t0 = std::chrono::steady_clock::now();
  Report rep;
  rep.csv_name = c.id + ".csv";
  std::string columns = c.solver == "expand" ? kExpandColumns : c.solver == "bw" ? kBwColumns : kBsBlochColumns;
  rep.csv = header(c.solver, ctx, columns);
  std::ostringstream summary;
  summary << summary_head("run", &c, ctx);

  Problem pr;
  try {
    pr = build_problem(c, ctx.seed);
  } catch (const ConfigError& e) {
    rep.exit_code = kExitValidation;
    summary << "status: invalid\nerror: " << e.what() << "\n";
    rep.summary = summary.str();
    return rep;
  }
  summary << "basis size: " << pr.spectrum.size() << ", model dimension: " << pr.model.dim() << "\n";

  Section sec;
  try {
    const bool cx = pr.potential.needs_complex();
    if (c.solver == "expand") {
      cx ? expand_rows<cplx>(c, pr, sec) : expand_rows<real>(c, pr, sec);
    } else if (c.solver == "bw") {
      bw_rows(c, pr, ctx, sec);
    } else {
      cx ? bsbloch_rows<cplx>(c, pr, ctx, sec) : bsbloch_rows<real>(c, pr, ctx, sec);
    }
    rep.csv += sec.csv_rows;
    summary << "status: ok\n" << sec.text.str();
  } catch (const Error& e) {
    rep.exit_code = exit_code_for(e);
    summary << "status: solver error\nerror: " << e.what() << "\n";
  }
  summary << "wall_time_s: " << format_number(seconds_since(t0)) << "\n";
  rep.summary = summary.str();
  return rep;
}

namespace {

struct SweepRow {
  std::string csv;
  bool ok = true;
  std::string note;
};

template <typename Scalar>
double msc_gap_diff(const ExpansionLedger<Scalar>& a, const ExpansionLedger<Scalar>& b, int n) {
  const auto& x = a.orders.at(n);
  const auto& y = b.orders.at(n);
  return std::max(max_abs(x.omega_msc - y.omega_msc), max_abs(x.heff_msc - y.heff_msc));
}

template <typename Scalar>
void sweep_expand(const ScenarioConfig& c, const SweepSpec& sw, const Problem& pr, const std::string& prefix,
                  std::ostringstream& rows) {
  const ExpansionLedger<Scalar> L = expand<Scalar>(pr.spectrum, pr.model, pr.potential, c.max_order);
  std::optional<ExpansionLedger<Scalar>> ref;
  if (sw.parameter == "gap") {
    ScenarioConfig d = c;
    d.model_gap = 0.0;
    const Problem pd = build_problem(d, 0);
    ref = expand<Scalar>(pd.spectrum, pd.model, pd.potential, c.max_order);
  }
  for (const auto& [n, t] : L.orders) {
    const double msc = std::max(max_abs(t.omega_msc), max_abs(t.heff_msc));
    rows << prefix << "ok," << n << ",,,,,," << format_number(msc) << ","
         << (ref ? format_number(msc_gap_diff(L, *ref, n)) : std::string()) << ",\n";
  }
}

SweepRow sweep_one(const ScenarioConfig& base, const SweepSpec& sw, std::size_t index, const RunContext& ctx) {
  const double value = sw.values[index];
  const std::uint64_t seed = ctx.seed + index;
  ScenarioConfig c = base;
  c.solver = sw.solver;
  std::ostringstream prefix;
  prefix << index << "," << sw.parameter << "," << format_number(value) << "," << seed << "," << sw.solver
         << ",";
  SweepRow row;
  std::ostringstream rows;
  auto fail = [&](const char* status, const std::string& what) {
    std::string msg = what;
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    rows.str("");
    rows << prefix.str() << status << ",,,,,,,,," << msg << "\n";
    row.ok = false;
    row.note = "row " + std::to_string(index) + ": " + what;
  };
  try {
    if (sw.parameter == "coupling") {
      c.coupling_scale = value;
    } else if (sw.parameter == "gap") {
      c.model_gap = value;
    } else if (sw.parameter == "quadrature") {
      if (value < 1 || value != std::floor(value)) throw ConfigError("sweep.values", "quadrature sizes must be integers >= 1");
      c.quadrature_nodes = static_cast<int>(value);
    } else {
      if (value < 0) throw ConfigError("sweep.values", "gamma must be >= 0");
      c.gamma = value;
    }
    const Problem pr = build_problem(c, seed);
    const std::vector<double> em = model_energies(pr.spectrum, pr.model);
    const bool cx = pr.potential.needs_complex();
    if (sw.solver == "expand") {
      cx ? sweep_expand<cplx>(c, sw, pr, prefix.str(), rows) : sweep_expand<real>(c, sw, pr, prefix.str(), rows);
    } else if (sw.solver == "bw") {
      if (cx) throw Error(ErrorKind::Invalid, "solve_bs_state: complex potentials need solver bsbloch");
      for (std::size_t m = 0; m < pr.model.dim(); ++m) {
        const int branch = branch_for_model_state(pr.spectrum, pr.model, pr.potential, pr.model.p[m], pr.lo);
        const BranchSolveReport r = solve_bs_state(pr.spectrum, pr.model, pr.potential, branch, pr.lo, pr.hi, c.branch);
        rows << prefix.str() << "ok," << m << "," << format_number(r.energy) << ",0,"
             << format_number(r.energy - em[m]) << "," << r.iterations << "," << format_number(r.residual)
             << ",,,\n";
      }
    } else {
      auto emit = [&](const auto& st) {
        std::vector<double> sorted = em;
        std::sort(sorted.begin(), sorted.end());
        for (Eigen::Index a = 0; a < st.energies.size(); ++a)
          rows << prefix.str() << "ok," << a << "," << re(st.energies[a]) << "," << im(st.energies[a]) << ","
               << format_number(std::real(st.energies[a]) - sorted[static_cast<std::size_t>(a)]) << ","
               << st.iterations << "," << format_number(st.bs_residuals[static_cast<std::size_t>(a)])
               << ",,,\n";
      };
      if (cx)
        emit(bs_bloch_solve<cplx>(pr.spectrum, pr.model, pr.potential, c.bloch));
      else
        emit(bs_bloch_solve<real>(pr.spectrum, pr.model, pr.potential, c.bloch));
    }
  } catch (const ConfigError& e) {
    fail("invalid", e.what());
  } catch (const Error& e) {
    fail("error", e.what());
  }
  row.csv = rows.str();
  return row;
}

const char* kSweepColumns =
    "row,parameter,value,seed,solver,status,index,energy_re,energy_im,shift,iterations,residual,msc_norm,"
    "msc_gap_diff,message";

}  // namespace

Report run_sweep(const ScenarioConfig& c, const RunContext& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  Report rep;
  rep.csv_name = c.id + ".sweep.csv";
  rep.csv = header("sweep", ctx, kSweepColumns);
  std::ostringstream summary;
  summary << summary_head("sweep", &c, ctx);
  if (!c.sweep) {
    rep.exit_code = kExitValidation;
    summary << "status: invalid\nerror: sweep: missing sweep section\n";
    rep.summary = summary.str();
    return rep;
  }
  const SweepSpec& sw = *c.sweep;
  summary << "parameter: " << sw.parameter << ", values: " << sw.values.size() << ", solver: " << sw.solver << "\n";

  // Validate the unmodified scenario first.
  try {
    (void)build_problem(c, ctx.seed);
  } catch (const ConfigError& e) {
    rep.exit_code = kExitValidation;
    summary << "status: invalid\nerror: " << e.what() << "\n";
    rep.summary = summary.str();
    return rep;
  }

  std::vector<SweepRow> rows(sw.values.size());
  const std::size_t workers = static_cast<std::size_t>(std::max(1, ctx.jobs));
  if (workers == 1) {
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = sweep_one(c, sw, i, ctx);
  } else {
    std::vector<std::future<void>> tasks;
    for (std::size_t w = 0; w < workers; ++w)
      tasks.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t i = w; i < rows.size(); i += workers) rows[i] = sweep_one(c, sw, i, ctx);
      }));
    for (auto& t : tasks) t.get();
  }
  std::size_t failed = 0;
  for (const SweepRow& r : rows) {
    rep.csv += r.csv;
    if (!r.ok) {
      ++failed;
      summary << "failed " << r.note << "\n";
    }
  }
  summary << "status: " << (failed ? "completed with failures" : "ok") << "\nrows: " << rows.size()
          << ", failed: " << failed << "\n";
  summary << "wall_time_s: " << format_number(seconds_since(t0)) << "\n";
  rep.exit_code = failed ? kExitSolver : kExitOk;
  rep.summary = summary.str();
  return rep;
}

Report run_verify(const RunContext& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  Report rep;
  rep.csv_name = "acceptance.csv";
  rep.csv = header("verify", ctx, "criterion,name,passed,detail");
  std::ostringstream summary;
  summary << summary_head("verify", nullptr, ctx);
  AcceptanceOptions opts;
  opts.jobs = ctx.jobs;
  std::size_t failed = 0;
  for (const CriterionResult& r : run_acceptance(opts)) {
    std::string detail = r.detail;
    std::replace(detail.begin(), detail.end(), ',', ';');
    rep.csv += std::to_string(r.id) + "," + r.name + "," + (r.passed ? "1" : "0") + "," + detail + "\n";
    summary << format_result(r) << "\n";
    failed += r.passed ? 0 : 1;
  }
  summary << "status: " << (failed ? "failed" : "ok") << "\n";
  summary << "wall_time_s: " << format_number(seconds_since(t0)) << "\n";
  rep.exit_code = failed ? kExitSolver : kExitOk;
  rep.summary = summary.str();
  return rep;
}

std::filesystem::path write_report(const Report& r, const std::filesystem::path& out) {
  std::filesystem::create_directories(out);
  const std::filesystem::path csv = out / r.csv_name;
  {
    std::ofstream f(csv, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + csv.string());
    f << r.csv;
  }
  std::ofstream s(out / "summary.txt", std::ios::binary);
  if (!s) throw std::runtime_error("cannot write " + (out / "summary.txt").string());
  s << r.summary;
  return csv;
}

}  // namespace bsbloch
