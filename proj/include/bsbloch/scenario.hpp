#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bsbloch/allorder.hpp"
#include "bsbloch/ensemble.hpp"
#include "bsbloch/potential.hpp"

namespace bsbloch {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitSolver = 3;

inline constexpr const char* kCsvVersion = "bsbloch-csv v1";

/// Configuration problem; `path` names the offending field, e.g.
/// "model_space.indices[1]".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

struct QuadratureSpec {
  int nodes = 16;
  double kmin = 0.0;
  double kmax = 1.0;
};

struct SparseEntry {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
};

struct TermSpec {
  enum class Type { constant, rational, photon };
  Type type = Type::constant;
  /// Dense coupling, or (when `sparse`) the entries below, sized once the
  /// basis is known.
  Mat<real> w;
  bool sparse = false;
  bool symmetric = false;
  std::vector<SparseEntry> entries;
  double pole = 0.0;
  int power = 1;
  QuadratureSpec quadrature;
  Profile profile;
  double gamma = 0.0;
};

struct SpectrumSpec {
  enum class Kind { diagonal, tensor, matrix };
  Kind kind = Kind::diagonal;
  std::vector<double> h0;
  std::vector<Orbital> orbitals1;
  std::vector<Orbital> orbitals2;
  Mat<real> h0_matrix;
};

struct SweepSpec {
  std::string parameter;  // coupling | gap | quadrature | gamma
  std::vector<double> values;
  std::string solver = "bw";
};

struct ScenarioConfig {
  std::string id = "scenario";
  SpectrumSpec spectrum;
  std::vector<std::size_t> model;
  bool exclude_negative_energy_q = false;
  std::vector<TermSpec> terms;
  std::string solver = "bw";  // expand | bw | bsbloch | verify | sweep
  int max_order = 3;
  BranchOptions branch;
  BsBlochOptions bloch;
  std::optional<std::pair<double, double>> bracket;
  bool oracle = true;
  std::optional<std::pair<double, double>> oracle_range;
  int oracle_grid = 201;
  std::uint64_t seed = 0;
  std::optional<EnsembleOptions> ensemble;  // generate the instance from the seed
  std::optional<SweepSpec> sweep;

  // Overrides used by sweeps.
  double coupling_scale = 1.0;
  std::optional<double> model_gap;
  std::optional<int> quadrature_nodes;
  std::optional<double> gamma;
};

/// Parses the JSON config text. Throws ConfigError.
ScenarioConfig parse_config(const std::string& text);

struct Problem {
  Spectrum spectrum;
  ModelSpace model;
  EnergyDependentPotential potential{1};
  double lo = 0.0;
  double hi = 0.0;
  double oracle_lo = 0.0;
  double oracle_hi = 0.0;
};

/// Builds and validates the instance. Throws ConfigError.
Problem build_problem(const ScenarioConfig& c, std::uint64_t seed);

std::string sha256_hex(const std::string& data);

struct RunContext {
  std::string config_hash;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct Report {
  int exit_code = kExitOk;
  std::string csv_name;
  std::string csv;
  std::string summary;
};

Report run_scenario(const ScenarioConfig& c, const RunContext& ctx);
Report run_sweep(const ScenarioConfig& c, const RunContext& ctx);
Report run_verify(const RunContext& ctx);

/// Writes the CSV and summary.txt into `out`; returns the CSV path.
std::filesystem::path write_report(const Report& r, const std::filesystem::path& out);

/// %.17g
std::string format_number(double x);

}  // namespace bsbloch
