#include "pilotwave/scenario.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <numbers>
#include <set>
#include <thread>

#include "json.hpp"
#include "pilotwave/multiparticle.hpp"

#ifndef PILOTWAVE_VERSION
#define PILOTWAVE_VERSION "unknown"
#endif

namespace pilotwave {

using json = nlohmann::ordered_json;

namespace {

template <class E>
struct EnumName {
  E value;
  const char* name;
};

constexpr std::array<EnumName<ScenarioKind>, 6> kKinds{{
    {ScenarioKind::weyl_trajectories, "weyl_trajectories"},
    {ScenarioKind::zigzag_single, "zigzag_single"},
    {ScenarioKind::zigzag_vs_dirac, "zigzag_vs_dirac"},
    {ScenarioKind::ensemble_relaxation, "ensemble_relaxation"},
    {ScenarioKind::equivariance, "equivariance"},
    {ScenarioKind::two_particle_map, "two_particle_map"},
}};
constexpr std::array<EnumName<Handedness>, 2> kHandedness{{{Handedness::R, "R"}, {Handedness::L, "L"}}};
constexpr std::array<EnumName<EnergySign>, 2> kEnergy{
    {{EnergySign::positive, "positive"}, {EnergySign::negative, "negative"}}};
constexpr std::array<EnumName<BranchChoice>, 3> kBranch{{{BranchChoice::zig, "zig"},
                                                         {BranchChoice::zag, "zag"},
                                                         {BranchChoice::equilibrium, "equilibrium"}}};
constexpr std::array<EnumName<Sampling>, 2> kSampling{
    {{Sampling::equilibrium, "equilibrium"}, {Sampling::uniform, "uniform"}}};

template <class E, std::size_t N>
const char* name_of(const std::array<EnumName<E>, N>& table, E v) {
  for (const auto& e : table)
    if (e.value == v) return e.name;
  return "?";
}

template <class E, std::size_t N>
E parse_enum(const std::array<EnumName<E>, N>& table, const json& j, const std::string& key) {
  if (j.is_string())
    for (const auto& e : table)
      if (j.get<std::string>() == e.name) return e.value;
  std::string allowed;
  for (const auto& e : table) allowed += (allowed.empty() ? "" : ", ") + std::string(e.name);
  throw ValidationError(key, "must be one of " + allowed);
}

bool is_trajectory_kind(ScenarioKind k) {
  return k == ScenarioKind::weyl_trajectories || k == ScenarioKind::zigzag_single ||
         k == ScenarioKind::zigzag_vs_dirac;
}
bool is_ensemble_kind(ScenarioKind k) {
  return k == ScenarioKind::ensemble_relaxation || k == ScenarioKind::equivariance;
}
bool is_zigzag_kind(ScenarioKind k) {
  return k == ScenarioKind::zigzag_single || k == ScenarioKind::zigzag_vs_dirac;
}

// ---------------------------------------------------------------------------------------------
// Reading

class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ValidationError(path_.empty() ? "<root>" : path_, "must be an object");
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  const json* get(const std::string& k) {
    used_.insert(k);
    const auto it = j_.find(k);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& require(const std::string& k) {
    const json* v = get(k);
    if (!v) throw ValidationError(key(k), "missing required key");
    return *v;
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!used_.count(item.key())) throw ValidationError(key(item.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

double to_number(const json& j, const std::string& key) {
  if (!j.is_number()) throw ValidationError(key, "expected a number");
  return j.get<double>();
}

std::uint64_t to_unsigned(const json& j, const std::string& key) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return j.get<std::uint64_t>();
  throw ValidationError(key, "expected a non-negative integer");
}

Vec3 to_vec3(const json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(key, "expected [x, y, z]");
  return {to_number(j[0], key + "[0]"), to_number(j[1], key + "[1]"), to_number(j[2], key + "[2]")};
}

Box to_box(const json& j, const std::string& key) {
  Section s(j, key);
  Box b{to_vec3(s.require("lo"), s.key("lo")), to_vec3(s.require("hi"), s.key("hi"))};
  s.finish();
  return b;
}

template <class T, class F>
void read_if(Section& s, const std::string& k, T& out, F convert) {
  if (const json* v = s.get(k)) out = convert(*v, s.key(k));
}

ModeSpec read_mode(const json& j, const std::string& path) {
  Section s(j, path);
  ModeSpec m;
  m.p = to_vec3(s.require("p"), s.key("p"));
  if (const json* a = s.get("amplitude")) {
    Section amp(*a, s.key("amplitude"));
    read_if(amp, "modulus", m.modulus, to_number);
    read_if(amp, "phase", m.phase, to_number);
    amp.finish();
  }
  if (const json* e = s.get("energy")) m.energy = parse_enum(kEnergy, *e, s.key("energy"));
  s.finish();
  return m;
}

Scenario read_scenario(const json& doc) {
  Section root(doc, "");
  Scenario sc;
  sc.kind = parse_enum(kKinds, root.require("kind"), "kind");
  if (const json* n = root.get("name")) {
    if (!n->is_string()) throw ValidationError("name", "expected a string");
    sc.name = n->get<std::string>();
  } else {
    sc.name = to_string(sc.kind);
  }

  {
    Section s(root.require("state"), "state");
    if (const json* m = s.get("mass")) sc.state.mass = to_number(*m, "state.mass");
    if (const json* h = s.get("handedness"))
      sc.state.handedness = parse_enum(kHandedness, *h, "state.handedness");
    const json& modes = s.require("modes");
    if (!modes.is_array()) throw ValidationError("state.modes", "expected a list of modes");
    for (std::size_t i = 0; i < modes.size(); ++i)
      sc.state.modes.push_back(read_mode(modes[i], "state.modes[" + std::to_string(i) + "]"));
    s.finish();
  }

  if (const json* init = root.get("initial")) {
    Section s(*init, "initial");
    if (const json* p = s.get("positions")) {
      if (!p->is_array()) throw ValidationError("initial.positions", "expected a list of [x, y, z]");
      for (std::size_t i = 0; i < p->size(); ++i)
        sc.initial.positions.push_back(
            to_vec3((*p)[i], "initial.positions[" + std::to_string(i) + "]"));
    }
    if (const json* b = s.get("branch")) sc.initial.branch = parse_enum(kBranch, *b, "initial.branch");
    if (const json* b = s.get("sampling"))
      sc.initial.sampling = parse_enum(kSampling, *b, "initial.sampling");
    if (const json* b = s.get("box")) sc.initial.box = to_box(*b, "initial.box");
    s.finish();
  }

  if (const json* g = root.get("grid")) {
    Section s(*g, "grid");
    GridSpec grid;
    grid.box = to_box(s.require("box"), "grid.box");
    read_if(s, "cell", grid.cell, to_number);
    if (const json* p = s.get("periodic")) grid.periodic = to_box(*p, "grid.periodic");
    s.finish();
    sc.grid = grid;
  }

  bool t1_given = false;
  if (const json* num = root.get("numerics")) {
    Section s(*num, "numerics");
    NumericsSpec& n = sc.numerics;
    read_if(s, "dt", n.dt, to_number);
    read_if(s, "t0", n.t0, to_number);
    t1_given = num->contains("t1");
    read_if(s, "t1", n.t1, to_number);
    read_if(s, "seed", n.seed, to_unsigned);
    if (const json* v = s.get("n")) n.n = to_unsigned(*v, "numerics.n");
    if (const json* c = s.get("checkpoints")) {
      if (!c->is_array()) throw ValidationError("numerics.checkpoints", "expected a list of times");
      for (std::size_t i = 0; i < c->size(); ++i)
        n.checkpoints.push_back(
            to_number((*c)[i], "numerics.checkpoints[" + std::to_string(i) + "]"));
    }
    if (const json* v = s.get("output_every")) n.output_every = to_unsigned(*v, "numerics.output_every");
    if (const json* v = s.get("threads")) {
      const std::uint64_t t = to_unsigned(*v, "numerics.threads");
      if (t > 1024) throw ValidationError("numerics.threads", "must be at most 1024");
      n.threads = static_cast<unsigned>(t);
    }
    s.finish();
  }
  if (is_ensemble_kind(sc.kind) && !sc.numerics.checkpoints.empty() && !t1_given)
    sc.numerics.t1 = sc.numerics.checkpoints.back();
  root.finish();
  return sc;
}

// ---------------------------------------------------------------------------------------------
// Writing

json vec3_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }
json box_json(const Box& b) { return json{{"lo", vec3_json(b.lo)}, {"hi", vec3_json(b.hi)}}; }

json scenario_json(const Scenario& s) {
  json doc;
  doc["name"] = s.name;
  doc["kind"] = to_string(s.kind);

  json state;
  if (s.state.mass) state["mass"] = *s.state.mass;
  state["handedness"] = name_of(kHandedness, s.state.handedness);
  state["modes"] = json::array();
  for (const ModeSpec& m : s.state.modes)
    state["modes"].push_back({{"p", vec3_json(m.p)},
                              {"amplitude", {{"modulus", m.modulus}, {"phase", m.phase}}},
                              {"energy", name_of(kEnergy, m.energy)}});
  doc["state"] = state;

  json init;
  init["positions"] = json::array();
  for (const Vec3& p : s.initial.positions) init["positions"].push_back(vec3_json(p));
  init["branch"] = name_of(kBranch, s.initial.branch);
  init["sampling"] = name_of(kSampling, s.initial.sampling);
  if (s.initial.box) init["box"] = box_json(*s.initial.box);
  doc["initial"] = init;

  if (s.grid) {
    json grid{{"box", box_json(s.grid->box)}, {"cell", s.grid->cell}};
    if (s.grid->periodic) grid["periodic"] = box_json(*s.grid->periodic);
    doc["grid"] = grid;
  }

  const NumericsSpec& n = s.numerics;
  doc["numerics"] = {{"dt", n.dt},
                     {"t0", n.t0},
                     {"t1", n.t1},
                     {"seed", n.seed},
                     {"n", n.n},
                     {"checkpoints", n.checkpoints},
                     {"output_every", n.output_every},
                     {"threads", n.threads}};
  return doc;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ValidationError(assignment, "override must look like key.path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string seg = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (seg.empty()) throw ValidationError(path, "empty path segment");
    json* next = nullptr;
    if (node->is_array()) {
      std::size_t idx = 0;
      const auto [ptr, ec] = std::from_chars(seg.data(), seg.data() + seg.size(), idx);
      if (ec != std::errc{} || ptr != seg.data() + seg.size() || idx >= node->size())
        throw ValidationError(path, "array index '" + seg + "' out of range");
      next = &(*node)[idx];
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object()) throw ValidationError(path, "cannot descend into a scalar");
      next = &(*node)[seg];
    }
    if (dot == std::string::npos) {
      *next = value;
      return;
    }
    node = next;
    start = dot + 1;
  }
}

json parse_document(std::string_view text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw ValidationError("<document>", "not valid JSON");
  return doc;
}

// ---------------------------------------------------------------------------------------------
// Validation helpers

bool finite(const Vec3& v) { return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z); }

void check_box(const Box& b, const std::string& key) {
  if (!finite(b.lo) || !finite(b.hi)) throw ValidationError(key, "corners must be finite");
  for (int a = 0; a < 3; ++a)
    if (!(b.hi[a] > b.lo[a])) throw ValidationError(key, "hi must exceed lo on every axis");
}

}  // namespace

const char* to_string(ScenarioKind kind) { return name_of(kKinds, kind); }

void validate(const Scenario& s) {
  const StateSpec& st = s.state;
  const NumericsSpec& n = s.numerics;
  const ScenarioKind kind = s.kind;
  const std::string kind_name = to_string(kind);

  if (st.modes.empty()) throw ValidationError("state.modes", "need at least one mode");
  bool any = false;
  for (std::size_t i = 0; i < st.modes.size(); ++i) {
    const ModeSpec& m = st.modes[i];
    const std::string key = "state.modes[" + std::to_string(i) + "]";
    if (!finite(m.p)) throw ValidationError(key + ".p", "must be finite");
    if (norm(m.p) == 0.0) throw ValidationError(key + ".p", "|p| must be nonzero");
    if (!std::isfinite(m.modulus) || m.modulus < 0.0)
      throw ValidationError(key + ".amplitude.modulus", "must be finite and >= 0");
    if (!std::isfinite(m.phase)) throw ValidationError(key + ".amplitude.phase", "must be finite");
    any = any || m.modulus > 0.0;
  }
  if (!any) throw ValidationError("state.modes", "at least one amplitude must be nonzero");

  const bool zigzag = is_zigzag_kind(kind) || (is_ensemble_kind(kind) && st.mass.has_value());
  if (is_zigzag_kind(kind) && !st.mass) throw ValidationError("state.mass", "missing required key");
  if (st.mass) {
    if (!zigzag) throw ValidationError("state.mass", "not used by " + kind_name);
    if (!(std::isfinite(*st.mass) && *st.mass > 0.0)) throw ValidationError("state.mass", "must be > 0");
  }
  if (zigzag || kind == ScenarioKind::two_particle_map) {
    if (st.handedness != Handedness::R)
      throw ValidationError("state.handedness", "must be R for " + kind_name);
    for (std::size_t i = 0; i < st.modes.size(); ++i)
      if (zigzag && st.modes[i].energy != EnergySign::positive)
        throw ValidationError("state.modes[" + std::to_string(i) + "].energy",
                              "zig-zag modes are positive-energy");
  }
  if (kind == ScenarioKind::two_particle_map) {
    if (st.modes.size() != 2) throw ValidationError("state.modes", "two_particle_map needs exactly 2 modes");
    const ModeSpec& a = st.modes[0];
    const ModeSpec& b = st.modes[1];
    if (a.p == b.p && a.energy == b.energy)
      throw ValidationError("state.modes", "identical modes antisymmetrize to zero");
    if (a.modulus == 0.0 || b.modulus == 0.0)
      throw ValidationError("state.modes", "both modes need a nonzero amplitude");
  }

  if (!(std::isfinite(n.dt) && n.dt > 0.0)) throw ValidationError("numerics.dt", "must be > 0");
  if (!std::isfinite(n.t0)) throw ValidationError("numerics.t0", "must be finite");
  if (!std::isfinite(n.t1)) throw ValidationError("numerics.t1", "must be finite");
  if (n.output_every == 0) throw ValidationError("numerics.output_every", "must be >= 1");

  for (std::size_t i = 0; i < s.initial.positions.size(); ++i)
    if (!finite(s.initial.positions[i]))
      throw ValidationError("initial.positions[" + std::to_string(i) + "]", "must be finite");

  if (is_trajectory_kind(kind)) {
    if (s.initial.positions.empty()) throw ValidationError("initial.positions", "need at least one start");
    if (!(n.t1 > n.t0)) throw ValidationError("numerics.t1", "must be > numerics.t0");
  }
  if (kind == ScenarioKind::two_particle_map && s.initial.positions.size() != 1)
    throw ValidationError("initial.positions", "two_particle_map needs the second particle's position");

  if (is_ensemble_kind(kind) || kind == ScenarioKind::two_particle_map) {
    if (!s.grid) throw ValidationError("grid", "missing required key");
    check_box(s.grid->box, "grid.box");
    if (!(std::isfinite(s.grid->cell) && s.grid->cell > 0.0)) throw ValidationError("grid.cell", "must be > 0");
    try {
      Grid(s.grid->box, s.grid->cell);
    } catch (const std::invalid_argument&) {
      throw ValidationError("grid.cell", "must divide every side of grid.box");
    }
    if (s.grid->periodic) check_box(*s.grid->periodic, "grid.periodic");
  }
  if (is_ensemble_kind(kind)) {
    if (n.n == 0) throw ValidationError("numerics.n", "must be >= 1");
    if (!s.initial.box) throw ValidationError("initial.box", "missing required key");
    check_box(*s.initial.box, "initial.box");
    if (n.checkpoints.empty()) throw ValidationError("numerics.checkpoints", "need at least one time");
    for (std::size_t i = 0; i < n.checkpoints.size(); ++i) {
      const std::string key = "numerics.checkpoints[" + std::to_string(i) + "]";
      if (!std::isfinite(n.checkpoints[i])) throw ValidationError(key, "must be finite");
      if (i == 0 ? n.checkpoints[i] < n.t0 : !(n.checkpoints[i] > n.checkpoints[i - 1]))
        throw ValidationError(key, "checkpoints must increase from numerics.t0");
    }
    if (n.t1 != n.checkpoints.back())
      throw ValidationError("numerics.t1", "must equal the last checkpoint");
  }
}

Scenario parse_scenario(std::string_view text) { return parse_scenario(text, {}); }

Scenario parse_scenario(std::string_view text, const std::vector<std::string>& overrides) {
  json doc = parse_document(text);
  for (const std::string& o : overrides) apply_override(doc, o);
  Scenario s = read_scenario(doc);
  validate(s);
  return s;
}

std::string emit_scenario(const Scenario& s, int indent) { return scenario_json(s).dump(indent); }

// ---------------------------------------------------------------------------------------------
// Presets

namespace {

std::vector<ModeSpec> three_modes() {
  const double w = 1.0 / std::sqrt(3.0);
  return {{{1, 0, 1}, w, 0.0}, {{-1, -2, -1}, w, 4.0}, {{1, -1, 1}, w, 9.0}};
}

Box torus() {
  const double L = 2.0 * std::numbers::pi;
  return {{0, 0, 0}, {L, L, L}};
}

struct PresetEntry {
  const char* name;
  const char* summary;
  Scenario (*make)();
};

Scenario make_fig1() {
  Scenario s;
  s.name = "fig1";
  s.kind = ScenarioKind::weyl_trajectories;
  s.state.modes = three_modes();
  s.initial.positions = {{0, 0, 0}, {-1, 0, 0}, {0, 0, -1}, {0, 0, 1},
                         {0, 1, 0}, {1, 0, 0}, {0, -1, 0}};
  s.numerics.t1 = 50.0;
  s.numerics.output_every = 10;
  return s;
}

Scenario make_fig8() {
  Scenario s;
  s.name = "fig8";
  s.kind = ScenarioKind::zigzag_vs_dirac;
  s.state.mass = 10.0;
  s.state.modes = three_modes();
  s.initial.positions = {{0, 1, 0}};
  s.numerics.t1 = 50.0;
  s.numerics.output_every = 10;
  return s;
}

Scenario make_equivariance() {
  Scenario s;
  s.name = "equivariance";
  s.kind = ScenarioKind::equivariance;
  s.state.modes = three_modes();
  s.initial.box = torus();
  s.grid = GridSpec{{{0, 0, 0}, {6, 6, 6}}, 0.5, torus()};
  s.numerics.dt = 1e-2;
  s.numerics.n = 100000;
  s.numerics.checkpoints = {0.0, 2.5, 5.0, 7.5, 10.0};
  s.numerics.t1 = 10.0;
  return s;
}

Scenario make_zigzag_equivariance() {
  Scenario s = make_equivariance();
  s.name = "zigzag_equivariance";
  s.state.mass = 10.0;
  s.numerics.dt = 1e-3;
  s.numerics.n = 10000;
  return s;
}

Scenario make_relaxation() {
  Scenario s;
  s.name = "relaxation";
  s.kind = ScenarioKind::ensemble_relaxation;
  s.state.modes = three_modes();
  s.initial.sampling = Sampling::uniform;
  const double h = std::numbers::pi;
  s.initial.box = Box{{0, 0, 0}, {h, h, h}};
  s.grid = GridSpec{{{0, 0, 0}, {6, 6, 6}}, 0.5, torus()};
  s.numerics.dt = 2e-2;
  s.numerics.n = 20000;
  for (int k = 0; k <= 10; ++k) s.numerics.checkpoints.push_back(5.0 * k);
  s.numerics.t1 = 50.0;
  return s;
}

Scenario make_pair_map() {
  Scenario s;
  s.name = "pair_map";
  s.kind = ScenarioKind::two_particle_map;
  s.state.modes = {{{1, 0, 1}, 1.0, 0.0}, {{-1, -2, -1}, 1.0, 4.0}};
  s.initial.positions = {{0, 0, 0}};
  s.grid = GridSpec{{{0, 0, 0}, {6, 6, 6}}, 0.5, std::nullopt};
  return s;
}

constexpr std::array<PresetEntry, 6> kPresets{{
    {"fig1", "seven massless Weyl trajectories in a three-mode state, t in [0, 50]", make_fig1},
    {"fig8", "zig-zag electron (m = 10) from (0,1,0) with its Dirac-velocity counterpart",
     make_fig8},
    {"equivariance", "equilibrium Weyl ensemble (n = 1e5) on the 2pi torus, H and L1 to t = 10",
     make_equivariance},
    {"zigzag_equivariance", "equilibrium zig-zag ensemble (n = 1e4, m = 10) to t = 10",
     make_zigzag_equivariance},
    {"relaxation", "octant-concentrated Weyl ensemble, coarse-grained H at t = 0, 5, ..., 50",
     make_relaxation},
    {"pair_map", "speed defect of an antisymmetrized two-particle state on a grid",
     make_pair_map},
}};

const PresetEntry& find_preset(std::string_view name) {
  for (const auto& p : kPresets)
    if (name == p.name) return p;
  std::string known;
  for (const auto& p : kPresets) known += (known.empty() ? "" : ", ") + std::string(p.name);
  throw ValidationError("preset", "unknown preset '" + std::string(name) + "' (known: " + known + ")");
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& p : kPresets) out.emplace_back(p.name);
  return out;
}

std::string preset_summary(std::string_view name) { return find_preset(name).summary; }

Scenario preset(std::string_view name) {
  Scenario s = find_preset(name).make();
  validate(s);
  return s;
}

// ---------------------------------------------------------------------------------------------
// Running

std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace {

class TextFile {
 public:
  TextFile(const Scenario& s, const std::string& columns) {
    text_ = "# pilotwave " PILOTWAVE_VERSION "\n# scenario " + emit_scenario(s, -1) + "\n# columns " +
            columns + "\n";
  }
  void comment(const std::string& line) { text_ += "# " + line + "\n"; }
  TextFile& operator<<(double v) {
    sep();
    text_ += format_double(v);
    return *this;
  }
  TextFile& operator<<(const Vec3& v) { return *this << v.x << v.y << v.z; }
  TextFile& operator<<(const char* word) {
    sep();
    text_ += word;
    return *this;
  }
  void end_row() {
    text_ += '\n';
    fresh_ = true;
    ++rows_;
  }
  std::size_t rows() const { return rows_; }
  const std::string& text() const { return text_; }

 private:
  void sep() {
    if (!fresh_) text_ += ' ';
    fresh_ = false;
  }
  std::string text_;
  bool fresh_ = true;
  std::size_t rows_ = 0;
};

struct PendingFile {
  std::string name;
  TextFile file;
};

std::string indexed(const char* stem, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%02zu.dat", stem, i);
  return buf;
}

WeylWavefunction weyl_state(const StateSpec& st) {
  std::vector<Mode> modes;
  for (const ModeSpec& m : st.modes)
    modes.push_back({m.p, std::polar(m.modulus, m.phase), m.energy, st.handedness});
  return WeylWavefunction(std::move(modes));
}

ZigzagState zigzag_state(const StateSpec& st) {
  std::vector<MomentumAmplitude> modes;
  for (const ModeSpec& m : st.modes) modes.push_back({m.p, std::polar(m.modulus, m.phase)});
  return make_zigzag_state(*st.mass, std::move(modes));
}

unsigned worker_count(unsigned requested, std::size_t tasks) {
  unsigned n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(tasks, 1)));
}

/// Runs fn(i) for i < n on a small pool; the exception of the lowest failing index is rethrown.
template <class F>
void parallel_indices(std::size_t n, unsigned threads, F fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned workers = worker_count(threads, n);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void write_trajectory(TextFile& f, const Trajectory& traj, std::size_t every,
                      const std::vector<JumpEvent>& jumps) {
  std::set<double> jump_times;
  for (const JumpEvent& j : jumps) jump_times.insert(j.t);
  const auto& rows = traj.samples;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const TrajectorySample& r = rows[i];
    if (i % every != 0 && i + 1 != rows.size() && !jump_times.count(r.t)) continue;
    f << r.t << r.x << (r.branch ? to_string(*r.branch) : "-") << r.speed;
    f.end_row();
  }
}

struct Collected {
  std::vector<PendingFile> files;
  std::vector<std::string> warnings;
  std::size_t node_hits = 0;
};

void run_trajectories(const Scenario& s, Collected& out) {
  const std::size_t starts = s.initial.positions.size();
  const NumericsSpec& n = s.numerics;
  std::vector<std::vector<PendingFile>> per_start(starts);
  std::vector<std::vector<std::string>> warnings(starts);

  if (s.kind == ScenarioKind::weyl_trajectories) {
    const VelocityField field = weyl_guidance(weyl_state(s.state));
    parallel_indices(starts, n.threads, [&](std::size_t i) {
      Trajectory traj;
      try {
        traj = integrate_deterministic(field, s.initial.positions[i], n.t0, n.t1, n.dt);
      } catch (const NodeError& e) {
        throw NodeError("start " + std::to_string(i) + ": " + e.what(), e.time());
      }
      PendingFile pf{indexed("traj", i), TextFile(s, "t x y z branch speed")};
      write_trajectory(pf.file, traj, n.output_every, {});
      per_start[i].push_back(std::move(pf));
    });
  } else {
    const ZigzagState state = zigzag_state(s.state);
    const CounterRng root(n.seed);
    parallel_indices(starts, n.threads, [&](std::size_t i) {
      const Vec3 x0 = s.initial.positions[i];
      CounterRng stream = root.split(i);
      Branch b0 = s.initial.branch == BranchChoice::zig ? Branch::zig : Branch::zag;
      if (s.initial.branch == BranchChoice::equilibrium) {
        const DiracSpinor psi = state(n.t0, x0);
        const double rho = psi.density();
        if (!(rho > kDensityFloor)) throw NodeError("start " + std::to_string(i) + " sits on a node", n.t0);
        b0 = stream.uniform() * rho < psi.left.norm2() ? Branch::zig : Branch::zag;
      }
      const std::uint64_t run_seed = stream.next_u64();
      ZigzagRun run;
      try {
        run = simulate_zigzag(state, x0, b0, n.t0, n.t1, n.dt, run_seed);
      } catch (const NodeError& e) {
        throw NodeError("start " + std::to_string(i) + ": " + e.what(), e.time());
      }
      for (const std::string& w : run.trajectory.meta.warnings)
        warnings[i].push_back("start " + std::to_string(i) + ": " + w);

      PendingFile zz{indexed("zigzag", i), TextFile(s, "t x y z branch speed")};
      zz.file.comment(std::string("initial branch ") + to_string(b0) + ", run seed " +
                      std::to_string(run_seed));
      write_trajectory(zz.file, run.trajectory, n.output_every, run.jumps);
      per_start[i].push_back(std::move(zz));

      PendingFile jf{indexed("jumps", i), TextFile(s, "t x y z from to")};
      for (const JumpEvent& j : run.jumps) {
        jf.file << j.t << j.x << to_string(j.from) << to_string(j.to);
        jf.file.end_row();
      }
      per_start[i].push_back(std::move(jf));

      if (s.kind == ScenarioKind::zigzag_vs_dirac) {
        Trajectory traj;
        try {
          traj = integrate_deterministic(dirac_guidance(state), x0, n.t0, n.t1, n.dt);
        } catch (const NodeError& e) {
          throw NodeError("start " + std::to_string(i) + " (Dirac): " + e.what(), e.time());
        }
        PendingFile df{indexed("dirac", i), TextFile(s, "t x y z branch speed")};
        write_trajectory(df.file, traj, n.output_every, {});
        per_start[i].push_back(std::move(df));
      }
    });
  }
  for (std::size_t i = 0; i < starts; ++i) {
    for (auto& f : per_start[i]) out.files.push_back(std::move(f));
    for (auto& w : warnings[i]) out.warnings.push_back(std::move(w));
  }
}

void write_frame(Collected& out, const Scenario& s, const EnsembleFrame& frame, std::size_t k) {
  PendingFile pf{indexed("frame", k), TextFile(s, "x y z branch")};
  pf.file.comment("t " + format_double(frame.t) + ", members " + std::to_string(frame.size()) +
                  ", node hits " + std::to_string(frame.node_hits));
  for (std::size_t i = 0; i < frame.size(); ++i) {
    pf.file << frame.positions[i] << (frame.branches.empty() ? "-" : to_string(frame.branches[i]));
    pf.file.end_row();
  }
  out.files.push_back(std::move(pf));
}

void run_ensemble(const Scenario& s, Collected& out) {
  const NumericsSpec& n = s.numerics;
  const Grid grid(s.grid->box, s.grid->cell);
  std::optional<WeylWavefunction> weyl;
  std::optional<ZigzagState> zz;
  TimeDensity rho;
  if (s.state.mass) {
    zz = zigzag_state(s.state);
    rho = [&](double t, const Vec3& x) { return (*zz)(t, x).density(); };
  } else {
    weyl = weyl_state(s.state);
    rho = [&](double t, const Vec3& x) { return (*weyl)(t, x).norm2(); };
  }

  const CounterRng root(n.seed);
  const std::uint64_t sample_seed = root.split(0).next_u64();
  const std::uint64_t branch_seed = root.split(1).next_u64();
  const std::uint64_t mover_seed = root.split(2).next_u64();
  const std::uint64_t floor_seed = root.split(3).next_u64();

  const DensityField sampling =
      s.initial.sampling == Sampling::uniform
          ? DensityField([](const Vec3&) { return 1.0; })
          : DensityField([&](const Vec3& x) { return rho(n.t0, x); });
  EnsembleFrame frame0 = sample_density(sampling, *s.initial.box, n.n, sample_seed);
  frame0.t = n.t0;
  if (zz) {
    if (s.initial.branch == BranchChoice::equilibrium) {
      assign_branches(frame0, *zz, branch_seed);
    } else {
      frame0.branches.assign(frame0.size(),
                             s.initial.branch == BranchChoice::zig ? Branch::zig : Branch::zag);
    }
  }
  const Mover mover = zz ? zigzag_mover(*zz, n.dt, mover_seed)
                         : deterministic_mover(weyl_guidance(*weyl), n.dt);

  HCurveOptions options;
  options.periodic_cell = s.grid->periodic;
  options.restrict_to_grid = true;
  options.threads = n.threads;
  const HCurve curve = h_curve(mover, frame0, grid, rho, n.checkpoints, options);

  PendingFile hf{"h_curve.dat", TextFile(s, "t H")};
  hf.file.comment("H is bias-corrected: raw - (K - 1) / 2n, K = occupied cells");
  PendingFile detail{"h_detail.dat", TextFile(s, "t H_raw bias members node_hits")};
  for (std::size_t k = 0; k < curve.samples.size(); ++k) {
    const HSample& h = curve.samples[k];
    hf.file << h.t << h.h.corrected();
    hf.file.end_row();
    detail.file << h.t << h.h.raw << h.h.bias << static_cast<double>(h.members)
                << static_cast<double>(curve.frames[k].node_hits);
    detail.file.end_row();
  }
  out.files.push_back(std::move(hf));
  out.files.push_back(std::move(detail));
  out.node_hits = curve.frames.back().node_hits;

  if (s.kind == ScenarioKind::equivariance) {
    const bool branched = zz.has_value();
    PendingFile lf{"l1.dat", TextFile(s, branched ? "t L1 floor L1_zig floor_zig L1_zag floor_zag"
                                                  : "t L1 floor")};
    lf.file.comment("floor: mean L1 of multinomial draws of the same size from the reference");
    for (std::size_t k = 0; k < curve.frames.size(); ++k) {
      EnsembleFrame f = curve.frames[k];
      if (s.grid->periodic) wrap_periodic(f, *s.grid->periodic);
      f = restrict_to(f, grid.box());
      const double t = f.t;
      const auto l1_row = [&](const std::vector<double>& counts, const DensityField& ref,
                              std::uint64_t stream) {
        double total = 0.0;
        for (double c : counts) total += c;
        const std::vector<double> masses = cell_masses(ref, grid);
        const double l1 = l1_distance(counts, masses);
        const double fl = sampling_noise_floor(masses, static_cast<std::size_t>(total), 200,
                                               CounterRng(floor_seed, stream).next_u64());
        lf.file << l1 << fl;
      };
      lf.file << t;
      l1_row(histogram(f, grid), [&](const Vec3& x) { return rho(t, x); }, 3 * k);
      if (branched) {
        l1_row(histogram(f, grid, Branch::zig),
               [&](const Vec3& x) { return (*zz)(t, x).left.norm2(); }, 3 * k + 1);
        l1_row(histogram(f, grid, Branch::zag),
               [&](const Vec3& x) { return (*zz)(t, x).right.norm2(); }, 3 * k + 2);
      }
      lf.file.end_row();
    }
    out.files.push_back(std::move(lf));
  }

  write_frame(out, s, curve.frames.front(), 0);
  if (curve.frames.size() > 1) write_frame(out, s, curve.frames.back(), curve.frames.size() - 1);
}

void run_pair_map(const Scenario& s, Collected& out) {
  const auto mode = [&](const ModeSpec& m) {
    return Mode{m.p, std::polar(m.modulus, m.phase), m.energy, Handedness::R};
  };
  const TwoWeylWavefunction wf = antisymmetrize(mode(s.state.modes[0]), mode(s.state.modes[1]));
  const Grid grid(s.grid->box, s.grid->cell);
  const Vec3 x2 = s.initial.positions[0];
  const double half = 0.5 * grid.cell();
  std::vector<double> defect(grid.size(), std::nan(""));
  std::vector<char> node(grid.size(), 0);
  parallel_indices(grid.size(), s.numerics.threads, [&](std::size_t c) {
    try {
      defect[c] = speed_defect(wf, s.numerics.t0, grid.cell_lo(c) + Vec3{half, half, half}, x2);
    } catch (const NodeError&) {
      node[c] = 1;
    }
  });
  PendingFile pf{"pair_map.dat", TextFile(s, "x y z speed_defect")};
  pf.file.comment("first particle at cell centers, second fixed at initial.positions[0]");
  for (std::size_t c = 0; c < grid.size(); ++c) {
    if (node[c]) {
      ++out.node_hits;
      continue;
    }
    pf.file << grid.cell_lo(c) + Vec3{half, half, half} << defect[c];
    pf.file.end_row();
  }
  out.files.push_back(std::move(pf));
  if (out.node_hits) out.warnings.push_back(std::to_string(out.node_hits) + " grid points on nodes skipped");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!os) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

RunReport run_scenario(const Scenario& s, const std::filesystem::path& out_dir) {
  validate(s);
  const auto start = std::chrono::steady_clock::now();
  Collected out;
  if (is_trajectory_kind(s.kind)) {
    run_trajectories(s, out);
  } else if (is_ensemble_kind(s.kind)) {
    run_ensemble(s, out);
  } else {
    run_pair_map(s, out);
  }

  std::filesystem::create_directories(out_dir);
  RunReport report;
  report.warnings = out.warnings;
  report.node_hits = out.node_hits;
  json manifest;
  manifest["code_version"] = PILOTWAVE_VERSION;
  manifest["scenario"] = scenario_json(s);
  manifest["seed"] = s.numerics.seed;
  manifest["files"] = json::array();
  for (const PendingFile& f : out.files) {
    write_text(out_dir / f.name, f.file.text());
    report.files.push_back({f.name, f.file.rows()});
    manifest["files"].push_back({{"name", f.name}, {"rows", f.file.rows()}});
  }
  manifest["warnings"] = out.warnings;
  manifest["node_hits"] = out.node_hits;
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_text(out_dir / "timing.txt", "wall_seconds " + format_double(report.wall_seconds) + "\n");
  return report;
}

}  // namespace pilotwave
