#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pilotwave/ensemble.hpp"

namespace pilotwave {

enum class ScenarioKind {
  weyl_trajectories,
  zigzag_single,
  zigzag_vs_dirac,
  ensemble_relaxation,
  equivariance,
  two_particle_map,
};

const char* to_string(ScenarioKind kind);

struct ModeSpec {
  Vec3 p;
  double modulus = 1.0;
  double phase = 0.0;  ///< radians
  EnergySign energy = EnergySign::positive;

  friend bool operator==(const ModeSpec&, const ModeSpec&) = default;
};

struct StateSpec {
  std::optional<double> mass;  ///< present for zig-zag states
  Handedness handedness = Handedness::R;
  std::vector<ModeSpec> modes;

  friend bool operator==(const StateSpec&, const StateSpec&) = default;
};

/// How initial branches are chosen for zig-zag runs.
enum class BranchChoice { zig, zag, equilibrium };

/// How ensemble members are drawn.
enum class Sampling { equilibrium, uniform };

struct InitialSpec {
  std::vector<Vec3> positions;  ///< trajectory starts, or the fixed second particle
  BranchChoice branch = BranchChoice::equilibrium;
  Sampling sampling = Sampling::equilibrium;
  std::optional<Box> box;  ///< sampling box of ensemble kinds

  friend bool operator==(const InitialSpec&, const InitialSpec&) = default;
};

struct GridSpec {
  Box box;
  double cell = 0.5;
  std::optional<Box> periodic;  ///< wrap members into this cell before binning

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct NumericsSpec {
  double dt = 1e-3;
  double t0 = 0.0;
  double t1 = 0.0;
  std::uint64_t seed = 0;
  std::size_t n = 0;                 ///< ensemble size
  std::vector<double> checkpoints;   ///< ensemble snapshot times
  std::size_t output_every = 1;      ///< trajectory row stride (jump rows are always kept)
  unsigned threads = 0;              ///< 0 = hardware concurrency

  friend bool operator==(const NumericsSpec&, const NumericsSpec&) = default;
};

struct Scenario {
  std::string name;
  ScenarioKind kind = ScenarioKind::weyl_trajectories;
  StateSpec state;
  InitialSpec initial;
  std::optional<GridSpec> grid;
  NumericsSpec numerics;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Invalid configuration. `key()` is the dotted path of the offending entry.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string key, const std::string& constraint)
      : std::runtime_error(key + ": " + constraint), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Parses and validates a JSON scenario. Unknown keys, missing required keys and non-physical
/// values raise ValidationError; omitted optional keys take their defaults.
Scenario parse_scenario(std::string_view text);

/// Applies `path=value` overrides (dotted path, array indices allowed; value parsed as JSON,
/// falling back to a plain string) to the document before parsing.
Scenario parse_scenario(std::string_view text, const std::vector<std::string>& overrides);

/// Canonical JSON for a scenario with every default resolved. parse(emit(s)) == s.
std::string emit_scenario(const Scenario& s, int indent = 2);

/// Checks every constraint; throws ValidationError.
void validate(const Scenario& s);

std::vector<std::string> preset_names();
/// One-line description of a preset.
std::string preset_summary(std::string_view name);
/// Throws ValidationError("preset", ...) for an unknown name.
Scenario preset(std::string_view name);

struct OutputFile {
  std::string name;
  std::size_t rows = 0;
};

struct RunReport {
  std::vector<OutputFile> files;
  std::vector<std::string> warnings;
  std::size_t node_hits = 0;
  double wall_seconds = 0.0;
};

/// Runs a validated scenario and writes its files into `out_dir` (created if needed):
/// data files, manifest.json (byte-identical for identical scenarios) and timing.txt.
/// Throws NodeError when a deterministic trajectory meets a node.
RunReport run_scenario(const Scenario& s, const std::filesystem::path& out_dir);

/// Formats a double with 17 significant digits independent of the locale.
std::string format_double(double v);

}  // namespace pilotwave
