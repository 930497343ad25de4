#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "bsbloch/scenario.hpp"

using namespace bsbloch;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path = fs::temp_directory_path() / (std::string("bsbloch_") + info->name() + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return path / name;
  }
};

int cli(const std::string& args) {
  const std::string cmd = std::string(BSBLOCH_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string example(const std::string& name) { return (fs::path(BSBLOCH_EXAMPLES) / name).string(); }

std::string config_error_path(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<none>";
}

const char* kToyB = R"({"spectrum": {"h0": [0.0]}, "model_space": {"indices": [0]},
  "potential": [{"type": "rational", "pole": -2.0, "matrix": [[0.5]]}],
  "solver": "bw", "bracket": [-0.5, 0.5]})";

}  // namespace

TEST(Config, ErrorsNameTheField) {
  EXPECT_EQ(config_error_path("{"), "<root>");
  EXPECT_EQ(config_error_path(R"({"spectrum": {"h0": [0, 1]}, "model_space": {"indices": [0]}, "bogus": 1})"),
            "bogus");
  EXPECT_EQ(config_error_path(R"({"spectrum": {"h0": [0, 1]}, "model_space": {"indices": [0]},
    "potential": [{"type": "rational", "pole": 1.0, "power": 0, "matrix": [[0, 0], [0, 0]]}]})"),
            "potential[0].power");
  EXPECT_EQ(config_error_path(R"({"spectrum": {"h0": [0, 1]}, "model_space": {"indices": [0]}, "solver": "x"})"),
            "solver");
}

TEST(Config, ModelIndexOutOfRange) {
  const auto c = parse_config(R"({"spectrum": {"h0": [0, 1]}, "model_space": {"indices": [5]}})");
  try {
    build_problem(c, 0);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path(), "model_space.indices[0]");
  }
}

TEST(Config, SymmetricSparseEntries) {
  const auto c = parse_config(R"({"spectrum": {"h0": [0, 1, 1.5, 2]}, "model_space": {"indices": [0]},
    "potential": [{"type": "constant", "entries": [[0, 1, 0.1]], "symmetric": true}]})");
  const auto p = build_problem(c, 0);
  const Mat<real> v = evaluate<real>(p.potential, 0.0);
  EXPECT_EQ(v(0, 1), 0.1);
  EXPECT_EQ(v(1, 0), 0.1);
  EXPECT_EQ(v.cwiseAbs().sum(), 0.2);
}

TEST(Scenario, ToyBBranchSolve) {
  RunContext ctx{"hash", 0, 1};
  const auto rep = run_scenario(parse_config(kToyB), ctx);
  EXPECT_EQ(rep.exit_code, kExitOk);
  const auto row = rep.csv.find("\nscenario,0,0,");
  ASSERT_NE(row, std::string::npos);
  EXPECT_NEAR(std::stod(rep.csv.substr(row + 14)), 0.2247448714, 1e-10);
  EXPECT_EQ(rep.csv.rfind(std::string("# ") + kCsvVersion, 0), 0u);
  EXPECT_NE(rep.summary.find("hash"), std::string::npos);
}

TEST(Scenario, EmptyPotentialBsBloch) {
  RunContext ctx{"h", 0, 1};
  const auto rep = run_scenario(parse_config(R"({"spectrum": {"h0": [0.0, 0.01, 1.0]},
    "model_space": {"indices": [0, 1]}, "potential": [], "solver": "bsbloch"})"), ctx);
  EXPECT_EQ(rep.exit_code, kExitOk);
  EXPECT_NE(rep.summary.find("iterations: 1\n"), std::string::npos);
}

TEST(Scenario, CouplingSweepScalesQuadratically) {
  auto c = parse_config(slurp(example("toy_a_coupling_sweep.json")));
  c.sweep->values = {1.0, 0.5};
  const auto rep = run_sweep(c, RunContext{"h", 0, 2});
  ASSERT_EQ(rep.exit_code, kExitOk);
  // Energies from the two data rows; shift column is E - E0 with E0 = 0.
  std::istringstream in(rep.csv);
  std::string line;
  std::vector<double> e;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("row,", 0) == 0) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
    e.push_back(std::stod(f.at(7)));
  }
  ASSERT_EQ(e.size(), 2u);
  EXPECT_NEAR(e[1] / e[0], 0.25, 0.0025);
}

TEST(Cli, ExitCodes) {
  TempDir tmp;
  const auto out = (tmp.path / "out").string();
  EXPECT_EQ(cli("run --config " + example("toy_b.json") + " --out " + out), 0);
  EXPECT_NE(slurp(fs::path(out) / "summary.txt").find("config_sha256"), std::string::npos);

  const auto bad = tmp.write("bad.json", R"({"spectrum": {"h0": [0, 1]}, "model_space": {"indices": [2]}})");
  EXPECT_EQ(cli("run --config " + bad.string() + " --out " + out), 2);
  EXPECT_EQ(cli("run --config " + (tmp.path / "missing.json").string()), 2);
  EXPECT_EQ(cli("frobnicate"), 2);

  // Bracket without a fixed point: the solver fails.
  const auto noroot = tmp.write("noroot.json", R"({"spectrum": {"h0": [0.0]}, "model_space": {"indices": [0]},
    "potential": [{"type": "rational", "pole": -2.0, "matrix": [[0.5]]}],
    "solver": "bw", "bracket": [0.5, 1.0], "oracle": {"enabled": false}})");
  EXPECT_EQ(cli("run --config " + noroot.string() + " --out " + out), 3);
}

TEST(Cli, RunIsDeterministic) {
  TempDir tmp;
  const auto a = tmp.path / "a", b = tmp.path / "b";
  ASSERT_EQ(cli("run --config " + example("random_instance.json") + " --out " + a.string()), 0);
  ASSERT_EQ(cli("run --config " + example("random_instance.json") + " --out " + b.string() + " --jobs 3"), 0);
  for (const auto& entry : fs::directory_iterator(a)) {
    if (entry.path().extension() != ".csv") continue;
    EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename()));
  }
}

TEST(Cli, EmptySweepWritesHeaderOnly) {
  TempDir tmp;
  const auto out = tmp.path / "out";
  ASSERT_EQ(cli("sweep --config " + example("toy_a_coupling_sweep.json") + " --values \"\" --out " + out.string()),
            0);
  std::string csv;
  for (const auto& entry : fs::directory_iterator(out))
    if (entry.path().extension() == ".csv") csv = slurp(entry.path());
  std::istringstream in(csv);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 2);
  EXPECT_EQ(csv.rfind("# ", 0), 0u);
  EXPECT_EQ(cli("sweep --config " + example("toy_a_coupling_sweep.json") + " --values 0.1,x"), 2);
}
