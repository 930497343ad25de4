#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "bsbloch/scenario.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string parameter;
  std::optional<std::string> values;
};

void add_common(CLI::App* cmd, Flags& f, bool needs_config) {
  auto* c = cmd->add_option("--config", f.config, "scenario config (JSON)");
  if (needs_config) c->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "output directory")->capture_default_str();
  cmd->add_option("--seed", f.seed, "base seed, overrides the config");
  cmd->add_option("--jobs", f.jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
}

int finish(const bsbloch::Report& rep, const std::string& out) {
  try {
    const auto csv = bsbloch::write_report(rep, out);
    std::cout << rep.summary << "wrote " << csv.string() << " and "
              << (std::filesystem::path(out) / "summary.txt").string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return bsbloch::kExitValidation;
  }
  if (rep.exit_code != bsbloch::kExitOk) std::cerr << "exit code " << rep.exit_code << "\n";
  return rep.exit_code;
}

// "0.1,0.05" -> {0.1, 0.05}; an empty string is an empty list.
std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || item.find_first_not_of(" \t", used) != std::string::npos)
      throw bsbloch::ConfigError("--values", "not a number: '" + item + "'");
    out.push_back(x);
  }
  return out;
}

int run_config(const Flags& f, bool sweep) {
  std::ifstream in(f.config, std::ios::binary);
  if (!in) {
    std::cerr << "config: cannot read " << f.config << "\n";
    return bsbloch::kExitValidation;
  }
  std::ostringstream text;
  text << in.rdbuf();
  bsbloch::ScenarioConfig cfg;
  try {
    cfg = bsbloch::parse_config(text.str());
    if (sweep && (!f.parameter.empty() || f.values)) {
      if (!cfg.sweep) cfg.sweep = bsbloch::SweepSpec{};
      if (!f.parameter.empty()) cfg.sweep->parameter = f.parameter;
      if (f.values) cfg.sweep->values = parse_values(*f.values);
      const std::string& p = cfg.sweep->parameter;
      if (p != "coupling" && p != "gap" && p != "quadrature" && p != "gamma")
        throw bsbloch::ConfigError("sweep.parameter", "expected coupling | gap | quadrature | gamma");
    }
    if (sweep && !cfg.sweep) throw bsbloch::ConfigError("sweep", "missing sweep section");
  } catch (const bsbloch::ConfigError& e) {
    std::cerr << "config error at " << e.what() << "\n";
    return bsbloch::kExitValidation;
  }
  bsbloch::RunContext ctx;
  ctx.config_hash = bsbloch::sha256_hex(text.str());
  ctx.seed = f.seed.value_or(cfg.seed);
  ctx.jobs = f.jobs;
  return finish(sweep ? bsbloch::run_sweep(cfg, ctx) : bsbloch::run_scenario(cfg, ctx), f.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-dependent effective Hamiltonians and Bethe-Salpeter-Bloch solver"};
  app.require_subcommand(1);
  Flags f;

  auto* run = app.add_subcommand("run", "run the solver selected in the config");
  add_common(run, f, true);

  auto* sweep = app.add_subcommand("sweep", "repeat a scenario over a parameter list");
  add_common(sweep, f, true);
  sweep->add_option("--parameter", f.parameter, "coupling | gap | quadrature | gamma");
  sweep->add_option("--values", f.values, "comma-separated values, overrides the config");

  auto* verify = app.add_subcommand("verify", "run the acceptance suite on the built-in toys");
  add_common(verify, f, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : bsbloch::kExitValidation;
  }

  if (verify->parsed()) {
    bsbloch::RunContext ctx;
    ctx.config_hash = "builtin";
    ctx.seed = f.seed.value_or(0);
    ctx.jobs = f.jobs;
    if (!f.config.empty()) {
      std::ifstream in(f.config, std::ios::binary);
      std::ostringstream text;
      text << in.rdbuf();
      ctx.config_hash = bsbloch::sha256_hex(text.str());
    }
    return finish(bsbloch::run_verify(ctx), f.out);
  }
  return run_config(f, sweep->parsed());
}
