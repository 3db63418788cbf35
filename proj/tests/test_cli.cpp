#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "hamcouple/app.hpp"
#include "hamcouple/config.hpp"

using namespace hamcouple;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(HAMCOUPLE_SOURCE_DIR) / "configs";

json minimal_preset() {
  return json::parse(R"json({
    "mode": "periodic", "M": 1, "T": "2*pi",
    "system": {"preset": "pendulum_oscillator", "A": 1, "mu1": 4, "mu2": 4, "nu1": 1, "nu2": 1,
               "P": "0.1*sin(x1)*sin(u)"}
  })json");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hamcouple_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_json(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(HAMCOUPLE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

bool mentions(const ValidationError& e, const std::string& what) {
  for (const auto& v : e.violations()) {
    if (v.find(what) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("minimal preset config loads") {
  const auto cfg = parse_config(minimal_preset());
  CHECK(cfg.M == 1);
  CHECK(cfg.system.T == doctest::Approx(2.0 * std::numbers::pi));
  REQUIRE(cfg.H1);
  CHECK(*cfg.H1->closed_form == doctest::Approx(1.5 * std::numbers::pi));
  CHECK(cfg.system.decomposition.has_value());
  CHECK(cfg.multistart.x_counts == std::vector<int>{4});
}

TEST_CASE("x3 in a config with M = 2 is rejected") {
  json j = json::parse(R"json({
    "mode": "periodic", "M": 2, "T": 1,
    "system": {"H": "0.5*(y1^2 + y2^2)", "P": "sin(x3)*u", "F": ["u", "v"]}
  })json");
  try {
    parse_config(j);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(mentions(e, "x3"));
    CHECK(mentions(e, "system.P"));
  }
}

TEST_CASE("mu2 < mu1 is rejected, with every other violation listed too") {
  json j = minimal_preset();
  j["system"]["mu1"] = 4;
  j["system"]["mu2"] = 2;
  j["system"]["nu1"] = -1;
  j["T"] = -3;
  try {
    parse_config(j);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(mentions(e, "system.mu2"));
    CHECK(mentions(e, "system.nu1"));
    CHECK(mentions(e, "T: must be positive"));
    CHECK(e.violations().size() >= 3);
  }
}

TEST_CASE("syntax errors and unknown keys are violations") {
  json j = minimal_preset();
  j["system"]["P"] = "sin(x1 * u";
  j["solver"] = {{"newton_tolerance", 1e-9}};
  try {
    parse_config(j);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(mentions(e, "system.P"));
    CHECK(mentions(e, "solver.newton_tolerance: unknown key"));
  }
}

TEST_CASE("malformed JSON reports the byte position") {
  const fs::path dir = scratch("malformed");
  std::ofstream(dir / "bad.json") << "{\"M\": 1,\n \"T\": }";
  try {
    load_config(dir / "bad.json");
    FAIL("expected ConfigError");
  } catch (const ValidationError&) {
    FAIL("not a validation problem");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("byte 16") != std::string::npos);
  }
}

TEST_CASE("config hash ignores key order and sees the seed") {
  const json a = json::parse(R"({"M": 1, "T": 2})");
  const json b = json::parse(R"({"T": 2, "M": 1})");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  json c = a;
  c["seed"] = 1;
  CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("periods on the asymmetric oscillator lists tau = 3 pi / 2") {
  const fs::path out = scratch("periods");
  REQUIRE(cli("periods --config " + (kConfigs / "asymmetric_periods.json").string() + " --out " + out.string()) == 0);
  const auto rows = read_csv(out / "periods.csv");
  REQUIRE(rows.size() >= 3);
  CHECK(rows[0] == std::vector<std::string>{"name", "tau", "tau_closed_form", "rel_error", "tau_plus", "tau_minus"});
  // 17 significant digits round-trip exactly.
  const double tau = std::stod(rows[1][1]);
  CHECK(std::abs(tau - 1.5 * std::numbers::pi) < 1e-12);
  CHECK(std::stod(rows[1][2]) == 1.5 * std::numbers::pi);
  CHECK(std::abs(std::stod(rows[1][4]) - 0.75 * std::numbers::pi) < 1e-12);
  const json res = json::parse(slurp(out / "results.json"));
  CHECK(res["subcommand"] == "periods");
  CHECK(res["tool"] == "hamcouple");
}

TEST_CASE("classify with tau1 = 3, tau2 = 2, T = 6 reports Double(2)") {
  const fs::path out = scratch("classify");
  REQUIRE(cli("classify --config " + (kConfigs / "classify_double.json").string() + " --out " + out.string()) == 0);
  const json res = json::parse(slurp(out / "results.json"));
  CHECK(res["resonance"]["label"] == "Double(2)");
  CHECK(res["resonance"]["N"] == 2);
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("exit");
  const fs::path out = dir / "out";

  json bad = minimal_preset();
  bad["system"]["mu2"] = 1;
  CHECK(cli("periods --config " + write_json(dir, bad).string() + " --out " + out.string()) == kExitConfig);

  json unsolvable = minimal_preset();
  unsolvable["solver"] = {{"max_iter", 1},
                          {"multistart", {{"x_counts", {1}}, {"y_counts", {1}}, {"y_ranges", {{0.7, 0.7}}},
                                          {"radii", {1.3}}, {"angles", 1}}}};
  CHECK(cli("solve-periodic --config " + write_json(dir, unsolvable).string() + " --out " + out.string()) ==
        kExitNoSolutions);
  CHECK(fs::exists(out / "results.json"));

  CHECK(cli("solve-neumann --config " + (kConfigs / "pendulum_asymmetric.json").string() + " --out " + out.string()) ==
        kExitConfig);
  CHECK(cli("bogus --config " + (kConfigs / "pendulum_asymmetric.json").string()) != 0);
}

TEST_CASE("HAMCOUPLE_OUT replaces the default output directory") {
  const fs::path dir = scratch("env");
  ::setenv("HAMCOUPLE_OUT", (dir / "from_env").c_str(), 1);
  CHECK(resolve_out_dir("") == dir / "from_env");
  CHECK(resolve_out_dir("explicit") == fs::path("explicit"));
  ::unsetenv("HAMCOUPLE_OUT");
  CHECK(resolve_out_dir("") == fs::path("hamcouple-out"));
}

TEST_CASE("solve-periodic is deterministic across runs and thread counts") {
  const fs::path dir = scratch("determinism");
  json j = minimal_preset();
  j["seed"] = 7;
  j["solver"] = {{"multistart",
                  {{"x_counts", {2}}, {"y_counts", {2}}, {"radii", {0.5, 2.0}}, {"angles", 3}, {"jitter", 0.05}}}};
  const fs::path cfg = write_json(dir, j);
  REQUIRE(cli("solve-periodic --config " + cfg.string() + " --out " + (dir / "a").string()) == 0);
  REQUIRE(cli("solve-periodic --config " + cfg.string() + " --out " + (dir / "b").string() + " --threads 3") == 0);
  CHECK(slurp(dir / "a" / "solutions.csv") == slurp(dir / "b" / "solutions.csv"));
  json ra = json::parse(slurp(dir / "a" / "results.json"));
  json rb = json::parse(slurp(dir / "b" / "results.json"));
  ra.erase("timing");
  rb.erase("timing");
  CHECK(ra == rb);

  // A different seed moves the jittered starts.
  REQUIRE(cli("solve-periodic --config " + cfg.string() + " --out " + (dir / "c").string() + " --seed 8") == 0);
  const json rc = json::parse(slurp(dir / "c" / "results.json"));
  CHECK(rc["seed"] == 8);
  CHECK(rc["config_hash"] != ra["config_hash"]);
}

TEST_CASE("solve-neumann on [0, 1] finds only the zero oscillator solution") {
  const fs::path out = scratch("neumann");
  REQUIRE(cli("solve-neumann --config " + (kConfigs / "neumann_nonresonant.json").string() + " --out " +
              out.string() + " --dump-trajectories") == 0);
  const auto rows = read_csv(out / "solutions.csv");
  REQUIRE(rows.size() > 1);
  CHECK(rows[0][2] == "u_a");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(std::abs(std::stod(rows[i][2])) < 1e-8);
    CHECK(std::stod(rows[i][3]) < 1e-9);
  }
  CHECK(fs::exists(out / "trajectories" / "class_0.csv"));
}

TEST_CASE("every example config loads") {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(kConfigs)) {
    if (e.path().extension() != ".json") continue;
    CAPTURE(e.path().string());
    CHECK_NOTHROW(load_config(e.path()));
    ++n;
  }
  CHECK(n >= 5);
}
