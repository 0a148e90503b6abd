#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "pilotwave/scenario.hpp"

using namespace pilotwave;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("pilotwave_test_" + tag);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> outputs(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().filename() != "timing.txt") out[e.path().filename().string()] = slurp(e.path());
  return out;
}

std::vector<std::vector<std::string>> rows(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> out;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::vector<std::string> cols;
    for (std::string c; ss >> c;) cols.push_back(c);
    out.push_back(cols);
  }
  return out;
}

Scenario with(const char* name, std::vector<std::string> overrides) {
  return parse_scenario(emit_scenario(preset(name)), overrides);
}

std::string diagnostic(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

const char* kMinimal = R"({"kind": "weyl_trajectories",
  "state": {"modes": [{"p": [0, 0, 1]}]},
  "initial": {"positions": [[0, 0, 0]]},
  "numerics": {"t1": 2}})";

}  // namespace

TEST_CASE("fig1 preset") {
  const Scenario s = preset("fig1");
  CHECK(s.kind == ScenarioKind::weyl_trajectories);
  REQUIRE(s.state.modes.size() == 3);
  CHECK(s.state.modes[0].p == Vec3{1, 0, 1});
  CHECK(s.state.modes[1].p == Vec3{-1, -2, -1});
  CHECK(s.state.modes[2].p == Vec3{1, -1, 1});
  CHECK(s.state.modes[1].phase == 4.0);
  CHECK(s.state.modes[2].phase == 9.0);
  CHECK(s.state.modes[0].modulus == s.state.modes[2].modulus);
  CHECK(s.numerics.t0 == 0.0);
  CHECK(s.numerics.t1 == 50.0);
  CHECK(s.initial.positions == std::vector<Vec3>{{0, 0, 0}, {-1, 0, 0}, {0, 0, -1}, {0, 0, 1},
                                                 {0, 1, 0}, {1, 0, 0}, {0, -1, 0}});
}

TEST_CASE("fig8 preset") {
  const Scenario s = preset("fig8");
  CHECK(s.kind == ScenarioKind::zigzag_vs_dirac);
  CHECK(s.state.mass == 10.0);
  CHECK(s.state.modes == preset("fig1").state.modes);
  CHECK(s.initial.positions == std::vector<Vec3>{{0, 1, 0}});
  CHECK(s.numerics.t1 == 50.0);
  CHECK_THROWS_AS(preset("fig9"), ValidationError);
}

TEST_CASE("defaults are applied and every preset round-trips") {
  const Scenario s = parse_scenario(kMinimal);
  CHECK(s.numerics.dt == 1e-3);
  CHECK(s.numerics.seed == 0);
  CHECK(s.name == "weyl_trajectories");
  CHECK(parse_scenario(emit_scenario(s)) == s);
  for (const std::string& name : preset_names()) {
    const Scenario p = preset(name);
    CHECK(parse_scenario(emit_scenario(p)) == p);
    CHECK(parse_scenario(emit_scenario(p, -1)) == p);
    CHECK_FALSE(preset_summary(name).empty());
  }
}

TEST_CASE("validation diagnostics name the key") {
  const std::string fig8 = emit_scenario(preset("fig8"));
  try {
    parse_scenario(fig8, {"state.mass=-1"});
    FAIL("negative mass accepted");
  } catch (const ValidationError& e) {
    CHECK(e.key() == "state.mass");
    CHECK(std::string(e.what()) == "state.mass: must be > 0");
  }
  CHECK(diagnostic(R"({"kind": "weyl_trajectories", "state": {"modes": [{"p": [0, 0, 1]}]},
                       "initial": {"positions": [[0, 0, 0]]}, "numerics": {"t1": 2, "dt": 0}})") ==
        "numerics.dt: must be > 0");
  CHECK(diagnostic(R"({"kind": "weyl_trajectories", "state": {"modes": [{"p": [0, 0, 0]}]},
                       "initial": {"positions": [[0, 0, 0]]}, "numerics": {"t1": 2}})") ==
        "state.modes[0].p: |p| must be nonzero");
  CHECK(diagnostic(R"({"kind": "weyl_trajectories", "state": {"modes": [{"p": [0, 0, 1], "spin": 1}]},
                       "initial": {"positions": [[0, 0, 0]]}, "numerics": {"t1": 2}})") ==
        "state.modes[0].spin: unknown key");
  CHECK(diagnostic(R"({"kind": "zigzag_single", "state": {"modes": [{"p": [0, 0, 1]}]},
                       "initial": {"positions": [[0, 0, 0]]}, "numerics": {"t1": 2}})") ==
        "state.mass: missing required key");
  CHECK(diagnostic(R"({"state": {"modes": []}})") == "kind: missing required key");
  CHECK(diagnostic(R"({"kind": "bogus"})").rfind("kind: must be one of", 0) == 0);
  CHECK(diagnostic("{not json") == "<document>: not valid JSON");
  CHECK(diagnostic(R"({"kind": "weyl_trajectories", "state": {"modes": [{"p": [0, 0, 1]}]},
                       "initial": {"positions": [[0, 0, 0]]}, "numerics": {"t1": 2}, "extra": 1})") ==
        "extra: unknown key");
  CHECK_THROWS_WITH(with("equivariance", {"grid.cell=0.7"}), "grid.cell: must divide every side of grid.box");
  CHECK_THROWS_WITH(with("fig1", {"state.mass=3"}), "state.mass: not used by weyl_trajectories");
}

TEST_CASE("dotted-path overrides") {
  const Scenario s = with("fig1", {"numerics.dt=0.01", "initial.positions.1=[5,5,5]", "name=custom"});
  CHECK(s.numerics.dt == 0.01);
  CHECK(s.initial.positions[1] == Vec3{5, 5, 5});
  CHECK(s.name == "custom");
  CHECK_THROWS_AS(with("fig1", {"initial.positions.9=[0,0,0]"}), ValidationError);
  CHECK_THROWS_AS(with("fig1", {"numerics.dt"}), ValidationError);
}

TEST_CASE("fig1 run writes seven luminal trajectories with self-describing headers") {
  const fs::path dir = scratch("fig1");
  const Scenario s = with("fig1", {"numerics.t1=5"});
  const RunReport report = run_scenario(s, dir);
  CHECK(report.files.size() == 7);
  CHECK(report.warnings.empty());
  for (int i = 0; i < 7; ++i) {
    const fs::path f = dir / ("traj_0" + std::to_string(i) + ".dat");
    const auto table = rows(f);
    REQUIRE(table.size() == 501);
    for (const auto& r : table) {
      REQUIRE(r.size() == 6);
      REQUIRE(r[4] == "-");
      REQUIRE(std::abs(std::stod(r[5]) - 1.0) < 1e-9);
    }
    CHECK(std::stod(table.front()[0]) == 0.0);
    CHECK(std::stod(table.back()[0]) == 5.0);

    std::ifstream in(f);
    std::string version, scenario, columns;
    std::getline(in, version);
    std::getline(in, scenario);
    std::getline(in, columns);
    CHECK(columns == "# columns t x y z branch speed");
    REQUIRE(scenario.rfind("# scenario ", 0) == 0);
    CHECK(parse_scenario(scenario.substr(11)) == s);
  }
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / "timing.txt"));
}

TEST_CASE("fig8 runs are byte-identical for a fixed seed") {
  const Scenario s = with("fig8", {"numerics.t1=10", "numerics.seed=42"});
  const fs::path a = scratch("fig8a");
  const fs::path b = scratch("fig8b");
  run_scenario(s, a);
  run_scenario(s, b);
  const auto first = outputs(a);
  CHECK(first.size() == 4);
  CHECK(first.count("zigzag_00.dat"));
  CHECK(first.count("dirac_00.dat"));
  CHECK(first.count("jumps_00.dat"));
  CHECK(first == outputs(b));

  for (const auto& r : rows(a / "zigzag_00.dat")) {
    REQUIRE((r[4] == "zig" || r[4] == "zag"));
    REQUIRE(std::abs(std::stod(r[5]) - 1.0) < 1e-9);
  }
  for (const auto& r : rows(a / "dirac_00.dat")) REQUIRE(std::stod(r[5]) < 1.0);

  const fs::path c = scratch("fig8c");
  run_scenario(with("fig8", {"numerics.t1=10", "numerics.seed=43"}), c);
  CHECK_FALSE(slurp(a / "zigzag_00.dat") == slurp(c / "zigzag_00.dat"));
}

TEST_CASE("ensemble scenarios are deterministic and write H curves") {
  const Scenario s = with("relaxation", {"numerics.n=400", "numerics.checkpoints=[0, 1, 2]",
                                         "numerics.t1=2", "numerics.dt=0.05"});
  const fs::path a = scratch("ens_a");
  const fs::path b = scratch("ens_b");
  const RunReport report = run_scenario(s, a);
  run_scenario(s, b);
  CHECK(outputs(a) == outputs(b));
  const auto h = rows(a / "h_curve.dat");
  REQUIRE(h.size() == 3);
  CHECK(std::stod(h[0][1]) > 0.5);
  CHECK(fs::exists(a / "frame_00.dat"));
  CHECK(fs::exists(a / "frame_02.dat"));
  CHECK(rows(a / "frame_00.dat").size() == 400);
  CHECK(report.node_hits == 0);

  const Scenario z = with("zigzag_equivariance", {"numerics.n=200", "numerics.checkpoints=[0, 0.5]",
                                                  "numerics.t1=0.5"});
  const fs::path c = scratch("ens_c");
  run_scenario(z, c);
  const auto l1 = rows(c / "l1.dat");
  REQUIRE(l1.size() == 2);
  CHECK(l1[0].size() == 7);
  for (const auto& r : rows(c / "frame_01.dat")) REQUIRE((r[3] == "zig" || r[3] == "zag"));
}

TEST_CASE("two-particle map") {
  const fs::path dir = scratch("pair");
  run_scenario(preset("pair_map"), dir);
  const auto table = rows(dir / "pair_map.dat");
  CHECK(table.size() == 1728);
  double worst = 0.0;
  for (const auto& r : table) {
    const double d = std::stod(r[3]);
    REQUIRE(d >= -1e-12);
    REQUIRE(d <= 1.0 + 1e-12);
    worst = std::max(worst, d);
  }
  CHECK(worst > 0.1);
}

TEST_CASE("number formatting is exact") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(format_double(50.0) == "50");
}
