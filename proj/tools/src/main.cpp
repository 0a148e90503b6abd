// pilotwave: run trajectory and ensemble scenarios from JSON configs or built-in presets.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "pilotwave/scenario.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw pilotwave::ValidationError("<config>", "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int execute(const pilotwave::Scenario& s, const std::string& out_dir) {
  const pilotwave::RunReport report = pilotwave::run_scenario(s, out_dir);
  for (const std::string& w : report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  for (const auto& f : report.files)
    std::printf("%s/%s  %zu rows\n", out_dir.c_str(), f.name.c_str(), f.rows);
  std::printf("%s: done in %.2f s\n", s.name.c_str(), report.wall_seconds);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pilot-wave trajectories for Weyl and zig-zag electrons", "pilotwave"};
  app.set_version_flag("--version", PILOTWAVE_VERSION);
  app.require_subcommand(1);

  std::string config;
  std::string name;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
  bool print_only = false;

  CLI::App* run = app.add_subcommand("run", "run a scenario config");
  run->add_option("config", config, "JSON scenario file")->required();
  run->add_option("--out", out_dir, "output directory")->capture_default_str();
  run->add_option("--set", overrides, "override a config key, e.g. numerics.dt=0.01");

  CLI::App* pre = app.add_subcommand("preset", "run a built-in scenario");
  pre->add_option("name", name, "preset name (see list-presets)")->required();
  pre->add_option("--out", out_dir, "output directory")->capture_default_str();
  pre->add_option("--set", overrides, "override a config key, e.g. numerics.seed=42");
  pre->add_flag("--print", print_only, "print the resolved config instead of running it");

  CLI::App* val = app.add_subcommand("validate", "check a scenario config without running it");
  val->add_option("config", config, "JSON scenario file")->required();
  val->add_option("--set", overrides, "override a config key");

  CLI::App* list = app.add_subcommand("list-presets", "show the built-in scenarios");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list) {
      for (const std::string& p : pilotwave::preset_names())
        std::printf("%-20s %s\n", p.c_str(), pilotwave::preset_summary(p).c_str());
      return kOk;
    }
    if (*pre) {
      const std::string text = pilotwave::emit_scenario(pilotwave::preset(name));
      const pilotwave::Scenario s = pilotwave::parse_scenario(text, overrides);
      if (print_only) {
        std::printf("%s\n", pilotwave::emit_scenario(s).c_str());
        return kOk;
      }
      return execute(s, out_dir);
    }
    const pilotwave::Scenario s = pilotwave::parse_scenario(read_file(config), overrides);
    if (*val) {
      std::printf("%s: valid %s scenario\n", s.name.c_str(), pilotwave::to_string(s.kind));
      return kOk;
    }
    return execute(s, out_dir);
  } catch (const pilotwave::ValidationError& e) {
    std::fprintf(stderr, "invalid scenario: %s\n", e.what());
    return kValidation;
  } catch (const pilotwave::NodeError& e) {
    std::fprintf(stderr, "aborted: %s\n", e.what());
    return kRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
}
