// Copyright 2026 The fermiweak Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fermiweak/errors.hpp"
#include "fermiweak/fock.hpp"
#include "fermiweak/kernel.hpp"
#include "fermiweak/model.hpp"
#include "fermiweak/spectral.hpp"
#include "fermiweak/verify.hpp"

namespace fermiweak::cli {

using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSolver = 3;

enum class KernelPreset { Sharp, SmoothGaussian, QuarkDecay, File };

struct KernelSource {
  KernelPreset preset = KernelPreset::SmoothGaussian;
  std::optional<double> lambda;  // defaults to params.lambda_uv
  Complex amplitude = 1.0;
  std::string path;              // resolved against the config directory
};

struct ScanAxes {
  std::vector<double> g;
  std::vector<double> sigma;
  std::vector<double> lambda;
  std::vector<std::pair<double, double>> windows;
};

struct RunConfig {
  std::optional<GridSpec> grid;  // absent when the kernel file carries the modes
  GradingScheme grading = GradingScheme::standard();
  PhysicalParams params;
  std::optional<int> n_max;  // absent means untruncated
  KernelSource kernel;
  ScanAxes scan;
  std::vector<std::string> checks;
  double tol = 1e-10;
  std::uint64_t seed = kDefaultSeed;
  std::size_t trials = 20;
  std::string output;
  unsigned threads = 1;
  /// The document with command-line overrides folded in and the output path
  /// removed; the config hash is taken over its serialization.
  json canonical = json::object();
};

// ---------------------------------------------------------------------------
// Config parsing.

namespace detail {

inline std::string join(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

[[noreturn]] inline void fail(const std::string& field, const std::string& what) {
  throw ConfigError("config field '" + field + "': " + what);
}

inline void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) fail(where.empty() ? "<root>" : where, "expected an object");
}

inline void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) fail(join(where, key), "unknown key");
  }
}

inline double number(const json& j, const std::string& field) {
  if (!j.is_number()) fail(field, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(field, "expected a finite number");
  return v;
}

inline std::vector<double> numbers(const json& j, const std::string& field) {
  if (!j.is_array()) fail(field, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::vector<double> nonempty_numbers(const json& j, const std::string& field) {
  std::vector<double> v = numbers(j, field);
  if (v.empty()) fail(field, "list must not be empty");
  return v;
}

inline Momentum vec3(const json& j, const std::string& field) {
  const std::vector<double> v = numbers(j, field);
  if (v.size() != 3) fail(field, "expected three components");
  return {v[0], v[1], v[2]};
}

inline std::uint64_t unsigned_integer(const json& j, const std::string& field) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
    fail(field, "expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

inline Complex complex_number(const json& j, const std::string& field) {
  if (j.is_number()) return {number(j, field), 0.0};
  const std::vector<double> v = numbers(j, field);
  if (v.size() != 2) fail(field, "expected a number or a [re, im] pair");
  return {v[0], v[1]};
}

inline std::vector<GridNode> parse_nodes(const json& obj, const std::string& where) {
  if (obj.contains("nodes")) {
    if (obj.contains("radii")) fail(join(where, "radii"), "give either nodes or radii, not both");
    const json& list = obj["nodes"];
    const std::string field = join(where, "nodes");
    if (!list.is_array() || list.empty()) fail(field, "expected a nonempty array of {p, w}");
    std::vector<GridNode> out;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string at = field + "[" + std::to_string(i) + "]";
      require_object(list[i], at);
      reject_unknown(list[i], {"p", "w"}, at);
      if (!list[i].contains("p")) fail(join(at, "p"), "missing");
      GridNode n;
      n.momentum = vec3(list[i]["p"], join(at, "p"));
      if (list[i].contains("w")) n.weight = number(list[i]["w"], join(at, "w"));
      out.push_back(n);
    }
    return out;
  }
  if (!obj.contains("radii")) fail(join(where, "radii"), "missing (or give nodes)");
  const std::vector<double> radii = nonempty_numbers(obj["radii"], join(where, "radii"));
  std::vector<double> weights;
  if (obj.contains("weights")) weights = numbers(obj["weights"], join(where, "weights"));
  Momentum dir{0.0, 0.0, 1.0};
  if (obj.contains("direction")) dir = vec3(obj["direction"], join(where, "direction"));
  try {
    return radial_nodes(radii, weights, dir);
  } catch (const ConfigError& e) {
    fail(where.empty() ? "grid" : where, e.what());
  }
}

inline GridSpec parse_grid(const json& j) {
  require_object(j, "grid");
  if (j.contains("species")) {
    reject_unknown(j, {"species"}, "grid");
    const json& list = j["species"];
    if (!list.is_array() || list.size() != kNumSpecies) fail("grid.species", "expected an array of four species");
    GridSpec g;
    for (std::size_t s = 0; s < kNumSpecies; ++s) {
      const std::string at = "grid.species[" + std::to_string(s) + "]";
      require_object(list[s], at);
      reject_unknown(list[s], {"nodes", "radii", "weights", "direction", "spins"}, at);
      g.species[s].nodes = parse_nodes(list[s], at);
      if (!list[s].contains("spins")) fail(join(at, "spins"), "missing");
      g.species[s].spins = nonempty_numbers(list[s]["spins"], join(at, "spins"));
    }
    return g;
  }
  reject_unknown(j, {"nodes", "radii", "weights", "direction", "both_spins"}, "grid");
  bool both = true;
  if (j.contains("both_spins")) {
    if (!j["both_spins"].is_boolean()) fail("grid.both_spins", "expected true or false");
    both = j["both_spins"].get<bool>();
  }
  return shared_grid(parse_nodes(j, "grid"), both);
}

inline PhysicalParams parse_params(const json& j) {
  require_object(j, "params");
  reject_unknown(j, {"m1", "m4", "g", "lambda_uv", "sigma", "eta"}, "params");
  PhysicalParams p;
  auto read = [&](const char* key, double& dst) {
    if (j.contains(key)) dst = number(j[key], join("params", key));
  };
  read("m1", p.m1);
  read("m4", p.m4);
  read("g", p.g);
  read("lambda_uv", p.lambda_uv);
  read("sigma", p.sigma);
  read("eta", p.eta);
  try {
    p.validate();
  } catch (const ConfigError& e) {
    fail("params", e.what());
  }
  return p;
}

inline KernelSource parse_kernel(const json& j, const std::filesystem::path& base) {
  require_object(j, "kernel");
  reject_unknown(j, {"preset", "lambda", "amplitude", "path"}, "kernel");
  if (!j.contains("preset") || !j["preset"].is_string()) fail("kernel.preset", "expected a preset name");
  const std::string name = j["preset"].get<std::string>();
  KernelSource k;
  if (name == "sharp") {
    k.preset = KernelPreset::Sharp;
  } else if (name == "smooth-gaussian") {
    k.preset = KernelPreset::SmoothGaussian;
  } else if (name == "quark-decay") {
    k.preset = KernelPreset::QuarkDecay;
  } else if (name == "file") {
    k.preset = KernelPreset::File;
  } else {
    fail("kernel.preset", "unknown preset '" + name + "' (sharp, smooth-gaussian, quark-decay, file)");
  }
  if (j.contains("lambda")) {
    k.lambda = number(j["lambda"], "kernel.lambda");
    if (!(*k.lambda > 0.0)) fail("kernel.lambda", "must be positive");
  }
  if (j.contains("amplitude")) {
    if (k.preset == KernelPreset::Sharp) fail("kernel.amplitude", "the sharp preset takes no amplitude");
    k.amplitude = complex_number(j["amplitude"], "kernel.amplitude");
  }
  if (k.preset == KernelPreset::File) {
    if (!j.contains("path") || !j["path"].is_string()) fail("kernel.path", "expected a file path");
    if (j.contains("lambda") || j.contains("amplitude")) fail("kernel", "a kernel file takes no lambda or amplitude");
    std::filesystem::path p = j["path"].get<std::string>();
    k.path = (p.is_absolute() ? p : base / p).string();
  } else if (j.contains("path")) {
    fail("kernel.path", "only the file preset reads a path");
  }
  return k;
}

inline ScanAxes parse_scan(const json& j) {
  require_object(j, "scan");
  reject_unknown(j, {"g", "sigma", "lambda", "windows"}, "scan");
  ScanAxes s;
  if (j.contains("g")) s.g = nonempty_numbers(j["g"], "scan.g");
  if (j.contains("sigma")) {
    s.sigma = nonempty_numbers(j["sigma"], "scan.sigma");
    for (double v : s.sigma) {
      if (!(v >= 0.0)) fail("scan.sigma", "values must be non-negative");
    }
  }
  if (j.contains("lambda")) s.lambda = nonempty_numbers(j["lambda"], "scan.lambda");
  if (j.contains("windows")) {
    const json& w = j["windows"];
    if (!w.is_array() || w.empty()) fail("scan.windows", "expected a nonempty array of [low, high] pairs");
    for (std::size_t i = 0; i < w.size(); ++i) {
      const std::string at = "scan.windows[" + std::to_string(i) + "]";
      const std::vector<double> v = numbers(w[i], at);
      if (v.size() != 2 || !(v[0] < v[1])) fail(at, "expected [low, high] with low < high");
      s.windows.emplace_back(v[0], v[1]);
    }
  }
  return s;
}

inline json parse_document(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann reports the position as "line L, column C".
    throw ConfigError(origin + ": " + e.what());
  }
}

inline std::string read_file(const std::string& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + what + " '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

inline constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir = {}) {
  using namespace detail;
  require_object(doc, "");
  reject_unknown(doc, {"grid", "grading", "params", "n_max", "kernel", "scan", "checks", "solver", "seed", "trials",
                       "output"},
                 "");
  RunConfig c;
  if (doc.contains("grid")) c.grid = parse_grid(doc["grid"]);
  if (doc.contains("grading")) {
    if (!doc["grading"].is_string()) fail("grading", "expected a grading name");
    const auto g = grading_from_name(doc["grading"].get<std::string>());
    if (!g) fail("grading", "unknown grading '" + doc["grading"].get<std::string>() + "'");
    c.grading = *g;
  }
  if (doc.contains("params")) c.params = parse_params(doc["params"]);
  if (doc.contains("n_max")) c.n_max = static_cast<int>(unsigned_integer(doc["n_max"], "n_max"));
  if (!doc.contains("kernel")) fail("kernel", "missing");
  c.kernel = parse_kernel(doc["kernel"], base_dir);
  if (c.kernel.preset == KernelPreset::File && c.grid) {
    fail("grid", "a kernel file defines the modes; remove the grid section");
  }
  if (c.kernel.preset != KernelPreset::File && !c.grid) fail("grid", "missing");
  if (doc.contains("scan")) c.scan = parse_scan(doc["scan"]);
  if (doc.contains("checks")) {
    const json& ch = doc["checks"];
    if (!ch.is_array()) fail("checks", "expected an array of check names");
    for (std::size_t i = 0; i < ch.size(); ++i) {
      if (!ch[i].is_string()) fail("checks[" + std::to_string(i) + "]", "expected a string");
      c.checks.push_back(ch[i].get<std::string>());
    }
  }
  if (doc.contains("solver")) {
    require_object(doc["solver"], "solver");
    reject_unknown(doc["solver"], {"tol"}, "solver");
    if (doc["solver"].contains("tol")) c.tol = number(doc["solver"]["tol"], "solver.tol");
    if (!(c.tol > 0.0)) fail("solver.tol", "must be positive");
  }
  if (doc.contains("seed")) c.seed = unsigned_integer(doc["seed"], "seed");
  if (doc.contains("trials")) {
    c.trials = static_cast<std::size_t>(unsigned_integer(doc["trials"], "trials"));
    if (c.trials == 0) fail("trials", "must be positive");
  }
  if (doc.contains("output")) {
    if (!doc["output"].is_string()) fail("output", "expected a path");
    c.output = doc["output"].get<std::string>();
  }
  c.canonical = doc;
  c.canonical.erase("output");
  c.canonical["seed"] = c.seed;
  c.canonical["solver"] = json{{"tol", c.tol}};
  if (c.kernel.preset == KernelPreset::File) {
    c.canonical["kernel"]["file_fnv1a"] = hex64(fnv1a(read_file(c.kernel.path, "kernel file")));
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  const std::string text = detail::read_file(path, "config file");
  const json doc = detail::parse_document(text, path);
  return parse_config(doc, std::filesystem::path(path).parent_path());
}

/// Command-line values that take precedence over the document.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
};

inline void apply(RunConfig& c, const Overrides& o) {
  if (o.seed) {
    c.seed = *o.seed;
    c.canonical["seed"] = c.seed;
  }
  if (o.tol) {
    if (!(*o.tol > 0.0) || !std::isfinite(*o.tol)) throw ConfigError("--tol must be a positive number");
    c.tol = *o.tol;
    c.canonical["solver"] = json{{"tol", c.tol}};
  }
  if (o.out) c.output = *o.out;
  if (o.threads) {
    if (*o.threads == 0) throw ConfigError("--threads must be at least 1");
    c.threads = *o.threads;
  }
}

inline std::string config_hash(const RunConfig& c) { return hex64(fnv1a(c.canonical.dump())); }

inline SolverOptions solver_options(const RunConfig& c) {
  SolverOptions o;
  o.tol = c.tol;
  o.seed = c.seed;
  return o;
}

// ---------------------------------------------------------------------------
// Model construction.

namespace detail {

inline SectorId parse_sector_key(const std::string& key) {
  if (key.size() != 2 || key[0] < '1' || key[0] > '4' || (key[1] != '+' && key[1] != '-')) {
    fail("kernel file sectors." + key, "sector keys are 1+, 1-, ..., 4-");
  }
  return {key[0] - '0', key[1] == '+' ? Charge::Plus : Charge::Minus};
}

/// {"sectors": {"1+": [{"p": [..], "spin": s, "w": w}, ...], ...},
///  "channels": {"+-": [[i1, i2, i3, i4, re, im], ...], "-+": [...]}}
inline Kernel load_kernel_file(const std::string& path, GradingScheme grading) {
  const json doc = parse_document(read_file(path, "kernel file"), path);
  const std::string root = "kernel file";
  if (!doc.is_object()) fail(root, "expected an object");
  reject_unknown(doc, {"sectors", "channels"}, root);
  if (!doc.contains("sectors") || !doc["sectors"].is_object()) fail(root + ".sectors", "expected an object");
  std::array<std::vector<ModeSpec>, kNumSectors> sectors;
  std::array<bool, kNumSectors> seen{};
  for (const auto& [key, list] : doc["sectors"].items()) {
    const SectorId id = parse_sector_key(key);
    const std::string at = root + ".sectors." + key;
    if (!list.is_array()) fail(at, "expected an array of modes");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string m = at + "[" + std::to_string(i) + "]";
      require_object(list[i], m);
      reject_unknown(list[i], {"p", "spin", "w"}, m);
      if (!list[i].contains("p") || !list[i].contains("spin")) fail(m, "needs p and spin");
      ModeSpec spec;
      spec.momentum = vec3(list[i]["p"], m + ".p");
      spec.spin = number(list[i]["spin"], m + ".spin");
      if (list[i].contains("w")) spec.weight = number(list[i]["w"], m + ".w");
      sectors[static_cast<std::size_t>(id.index())].push_back(spec);
    }
    seen[static_cast<std::size_t>(id.index())] = true;
  }
  for (int s = 0; s < kNumSectors; ++s) {
    if (!seen[static_cast<std::size_t>(s)]) fail(root + ".sectors", "sector " + to_string(SectorId::from_index(s)) + " is missing");
  }
  ModeTable table(sectors, grading);
  Kernel g(table, Kernel::Origin::User);
  if (doc.contains("channels")) {
    if (!doc["channels"].is_object()) fail(root + ".channels", "expected an object");
    for (const auto& [name, entries] : doc["channels"].items()) {
      const std::string at = root + ".channels." + name;
      Charge eps = Charge::Plus;
      if (name == channel_name(Charge::Plus)) {
        eps = Charge::Plus;
      } else if (name == channel_name(Charge::Minus)) {
        eps = Charge::Minus;
      } else {
        fail(at, "channel names are +- and -+");
      }
      KernelTensor t(table, channel_sectors(eps));
      if (!entries.is_array()) fail(at, "expected an array of [i1, i2, i3, i4, re, im]");
      for (std::size_t e = 0; e < entries.size(); ++e) {
        const std::string row = at + "[" + std::to_string(e) + "]";
        if (!entries[e].is_array() || entries[e].size() != 6) fail(row, "expected [i1, i2, i3, i4, re, im]");
        KernelTensor::Index idx{};
        for (std::size_t a = 0; a < 4; ++a) {
          idx[a] = static_cast<std::size_t>(unsigned_integer(entries[e][a], row));
          if (idx[a] >= t.dims()[a]) fail(row, "index " + std::to_string(idx[a]) + " out of range on axis " + std::to_string(a + 1));
        }
        t(idx) = {number(entries[e][4], row), number(entries[e][5], row)};
      }
      g.set_channel(eps, std::move(t));
    }
  }
  return g;
}

}  // namespace detail

struct Model {
  FockBasis basis;
  Kernel kernel;
};

inline Kernel make_kernel(const RunConfig& c, const ModeTable& table) {
  const double lambda = c.kernel.lambda.value_or(c.params.lambda_uv);
  switch (c.kernel.preset) {
    case KernelPreset::Sharp: return sharp_cutoff_kernel(table, lambda);
    case KernelPreset::SmoothGaussian: return smooth_gaussian_kernel(table, lambda, c.kernel.amplitude);
    case KernelPreset::QuarkDecay: return quark_decay_gaussian(table, lambda, c.kernel.amplitude);
    case KernelPreset::File: return detail::load_kernel_file(c.kernel.path, c.grading);
  }
  throw ConfigError("unknown kernel preset");
}

inline Model build_model(const RunConfig& c) {
  Kernel kernel = c.kernel.preset == KernelPreset::File ? detail::load_kernel_file(c.kernel.path, c.grading)
                                                        : make_kernel(c, build_mode_table(*c.grid, c.grading));
  const int n_max = c.n_max.value_or(static_cast<int>(kernel.table().size()));
  return {build_basis(kernel.table(), n_max), std::move(kernel)};
}

// ---------------------------------------------------------------------------
// Output.

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::string csv() const {
    std::string out;
    for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + columns[i];
    out += "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + r[i];
      out += "\n";
    }
    return out;
  }
};

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
}

/// Writes the payload to the output path, or to `stdout_sink` when none is
/// configured, plus `<output>.meta.json` holding everything that may differ
/// between identical runs.
inline void emit(const RunConfig& c, const std::string& command, const std::string& payload, json meta,
                 std::ostream& stdout_sink) {
  if (c.output.empty()) {
    stdout_sink << payload;
    return;
  }
  write_text(c.output, payload);
  meta["command"] = command;
  meta["config_hash"] = config_hash(c);
  meta["config"] = c.canonical;
  meta["seed"] = c.seed;
  meta["tol"] = c.tol;
  meta["threads"] = c.threads;
  meta["timestamp"] = utc_timestamp();
  write_text(c.output + ".meta.json", meta.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Job pool.

/// Runs fn(i) for i in [0, n) on up to `threads` workers and returns the
/// results in index order. An exception escaping a job is rethrown after all
/// workers have joined, lowest index first.
template <typename T>
std::vector<T> run_jobs(std::size_t n, unsigned threads, const std::function<T(std::size_t)>& fn) {
  std::vector<std::optional<T>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned count = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<T> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// ---------------------------------------------------------------------------
// Commands.

inline double default_lambda(const RunConfig& c) {
  const double l = c.scan.lambda.empty() ? 0.5 * c.params.m1 : c.scan.lambda.front();
  if (!(l > 0.0 && l < c.params.m1)) throw ConfigError("config field 'scan.lambda': must lie in (0, m1)");
  return l;
}

inline int cmd_build(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const Model m = build_model(c);
  const ModeTable& table = m.basis.table();
  const PhysicalParams params = c.params;
  const SparseOperator h0 = assemble_H0(m.basis, params);
  const SparseOperator hi = assemble_HI(m.basis, m.kernel, c.threads);
  out << "config_hash      " << config_hash(c) << "\n";
  out << "modes            " << table.size() << "\n";
  out << "sector_sizes    ";
  for (int s = 0; s < kNumSectors; ++s) out << " " << table.sector_size(SectorId::from_index(s));
  out << "\n";
  out << "n_max            " << m.basis.n_max() << (m.basis.untruncated() ? " (untruncated)" : "") << "\n";
  out << "dimension        " << m.basis.size() << "\n";
  out << "nnz_H0           " << h0.nnz() << "\n";
  out << "nnz_HI           " << hi.nnz() << "\n";
  out << "kernel           " << to_string(m.kernel.origin()) << "\n";
  for (Charge eps : kChannels) {
    out << "kernel_norm_" << channel_name(eps) << "   " << fmt(m.kernel.l2_norm(eps)) << "\n";
  }
  out << "infrared_H1      " << fmt(infrared_diagnostic(m.kernel)) << "\n";
  if (m.kernel.is_zero()) err << "warning: the kernel vanishes on every grid node (zero norm)\n";
  return kExitOk;
}

struct RowOutcome {
  std::vector<std::string> cells;
  bool solver_failed = false;
};

inline int cmd_gs_scan(const RunConfig& c, std::ostream& out, std::ostream& err) {
  if (c.scan.g.empty()) throw ConfigError("config field 'scan.g': gs-scan needs a list of couplings");
  const Model m = build_model(c);
  const double lambda = default_lambda(c);
  const std::string hash = config_hash(c);
  const SolverOptions opt = solver_options(c);
  Table t;
  t.columns = {"config_hash", "g", "sigma", "lambda", "energy", "residual", "overlap", "deficit",
               "massive_excited", "neutrino_excited", "n2_half", "n3_half", "h0_norm", "status"};
  const auto rows = run_jobs<RowOutcome>(c.scan.g.size(), c.threads, [&](std::size_t i) {
    const double g = c.scan.g[i];
    const double nan = std::numeric_limits<double>::quiet_NaN();
    try {
      const OverlapPoint p = overlap_point(m.basis, c.params, m.kernel, g, c.params.sigma, lambda, opt);
      return RowOutcome{{hash, fmt(g), fmt(c.params.sigma), fmt(lambda), fmt(p.energy), fmt(p.residual),
                         fmt(p.overlap), fmt(p.deficit()), fmt(p.massive_excited), fmt(p.neutrino_excited),
                         fmt(p.n2_half), fmt(p.n3_half), fmt(p.h0_norm), "ok"},
                        false};
    } catch (const SolverError& e) {
      return RowOutcome{{hash, fmt(g), fmt(c.params.sigma), fmt(lambda), fmt(nan), fmt(e.best_residual()),
                         fmt(nan), fmt(nan), fmt(nan), fmt(nan), fmt(nan), fmt(nan), fmt(nan), "solver_failure"},
                        true};
    }
  });
  std::size_t failures = 0;
  for (const auto& r : rows) {
    t.rows.push_back(r.cells);
    failures += r.solver_failed;
  }
  emit(c, "gs-scan", t.csv(), json{{"columns", t.columns}, {"rows", t.rows.size()}, {"solver_failures", failures}},
       out);
  if (failures) err << "gs-scan: " << failures << " point(s) hit a solver failure\n";
  return failures ? kExitSolver : kExitOk;
}

inline int cmd_ir_scan(const RunConfig& c, std::ostream& out, std::ostream& err) {
  if (c.scan.sigma.empty()) throw ConfigError("config field 'scan.sigma': ir-scan needs a list of cutoffs");
  const Model m = build_model(c);
  const double lambda = default_lambda(c);
  const std::string hash = config_hash(c);
  const SolverOptions opt = solver_options(c);
  const double g = c.params.g;
  Table t;
  t.columns = {"config_hash", "g",         "sigma",        "energy",       "residual", "kernel_diff_norm",
               "overlap",     "pull_ratio_2", "pull_ratio_3", "number_2",  "number_3", "h0_norm",
               "status"};
  const auto rows = run_jobs<RowOutcome>(c.scan.sigma.size(), c.threads, [&](std::size_t i) {
    const double s = c.scan.sigma[i];
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double kdiff = difference_norm_sum(m.kernel, infrared_cutoff(m.kernel, s));
    try {
      const PullThroughPoint p = pull_through_point(m.basis, c.params, m.kernel, g, s, opt);
      const OverlapPoint o = overlap_point(m.basis, c.params, m.kernel, g, s, lambda, opt);
      return RowOutcome{{hash, fmt(g), fmt(s), fmt(p.energy), fmt(p.residual), fmt(kdiff), fmt(o.overlap),
                         fmt(p.ratio(2)), fmt(p.ratio(3)), fmt(p.number[0]), fmt(p.number[1]), fmt(p.h0_norm), "ok"},
                        false};
    } catch (const SolverError& e) {
      return RowOutcome{{hash, fmt(g), fmt(s), fmt(nan), fmt(e.best_residual()), fmt(kdiff), fmt(nan), fmt(nan),
                         fmt(nan), fmt(nan), fmt(nan), fmt(nan), "solver_failure"},
                        true};
    }
  });
  std::size_t failures = 0;
  for (const auto& r : rows) {
    t.rows.push_back(r.cells);
    failures += r.solver_failed;
  }
  emit(c, "ir-scan", t.csv(), json{{"columns", t.columns}, {"rows", t.rows.size()}, {"solver_failures", failures}},
       out);
  if (failures) err << "ir-scan: " << failures << " point(s) hit a solver failure\n";
  return failures ? kExitSolver : kExitOk;
}

inline int cmd_mourre(const RunConfig& c, std::ostream& out, std::ostream& err) {
  if (c.scan.windows.empty()) throw ConfigError("config field 'scan.windows': mourre needs energy windows");
  if (c.kernel.preset == KernelPreset::Sharp) {
    throw ConfigError("mourre: the sharp cutoff kernel is not differentiable; use smooth-gaussian or quark-decay");
  }
  const Model m = build_model(c);
  const Kernel a_g = dilation_kernel(m.kernel);
  const std::vector<double> couplings = c.scan.g.empty() ? std::vector<double>{0.0} : c.scan.g;
  const std::string hash = config_hash(c);
  const SparseOperator h0 = assemble_H0(m.basis, c.params);
  const SparseOperator c0 = commutator_A_H0(m.basis, c.params);
  const SparseOperator hi = assemble_HI(m.basis, m.kernel);
  const SparseOperator ci = commutator_A_HI(m.basis, a_g);
  Table t;
  t.columns = {"config_hash", "window_low", "window_high", "beta", "g", "bottom", "dim_window", "status"};
  std::size_t skipped = 0;
  const auto blocks = run_jobs<std::vector<RowOutcome>>(couplings.size(), c.threads, [&](std::size_t i) {
    const double g = couplings[i];
    const SparseOperator h(SparseMatrix(h0.matrix() + g * hi.matrix()), true);
    const SparseOperator com(SparseMatrix(c0.matrix() + g * ci.matrix()), true);
    std::vector<RowOutcome> rows;
    for (const auto& [a, b] : c.scan.windows) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      try {
        const MourreRecord r = mourre_bottom(h, com, a, b, thresholds_for_window(c.params, b));
        rows.push_back({{hash, fmt(a), fmt(b), fmt(r.beta), fmt(g), fmt(r.empty() ? nan : r.bottom),
                         std::to_string(r.dim_window), r.empty() ? "empty" : "ok"},
                        false});
      } catch (const ThresholdCollisionError&) {
        rows.push_back({{hash, fmt(a), fmt(b), fmt(nan), fmt(g), fmt(nan), "0", "threshold_collision"}, false});
      } catch (const SolverError& e) {
        rows.push_back({{hash, fmt(a), fmt(b), fmt(nan), fmt(g), fmt(nan), "0", "solver_failure"}, true});
      }
    }
    return rows;
  });
  std::size_t failures = 0;
  for (const auto& block : blocks) {
    for (const auto& r : block) {
      t.rows.push_back(r.cells);
      failures += r.solver_failed;
      skipped += r.cells.back() == "threshold_collision";
    }
  }
  emit(c, "mourre", t.csv(),
       json{{"columns", t.columns}, {"rows", t.rows.size()}, {"threshold_collisions", skipped},
            {"solver_failures", failures}},
       out);
  if (skipped) err << "mourre: " << skipped << " window(s) touch a threshold and were skipped\n";
  if (failures) err << "mourre: " << failures << " window(s) hit a solver failure\n";
  return failures ? kExitSolver : kExitOk;
}

/// Check name -> runner. Scan inputs come from the config; each runner
/// reports the config field it is missing.
using CheckRunner = std::function<std::vector<CheckResult>(const RunConfig&, const Model&)>;

inline const std::map<std::string, CheckRunner>& check_registry() {
  static const std::map<std::string, CheckRunner> registry = [] {
    std::map<std::string, CheckRunner> r;
    auto need = [](const auto& list, const char* field, const char* check) {
      if (list.empty()) {
        throw ConfigError(std::string("config field '") + field + "': required by check '" + check + "'");
      }
    };
    r["algebra"] = [](const RunConfig&, const Model& m) { return check_algebra(m.basis); };
    r["smeared_norm"] = [](const RunConfig& c, const Model& m) {
      return std::vector<CheckResult>{check_smeared_norm(m.basis, c.trials, c.seed)};
    };
    r["prop1"] = [](const RunConfig& c, const Model& m) {
      return std::vector<CheckResult>{check_prop1(m.basis, c.trials, c.seed)};
    };
    r["prop2"] = [](const RunConfig& c, const Model& m) { return check_prop2(m.basis, c.trials, c.seed); };
    r["prop2bis"] = [](const RunConfig& c, const Model& m) { return check_prop2bis(m.basis, c.trials, c.seed); };
    r["relative_bound"] = [](const RunConfig& c, const Model& m) {
      return check_relative_bound(m.basis, c.params, m.kernel, c.trials, c.seed);
    };
    r["number_identity"] = [](const RunConfig& c, const Model& m) {
      return std::vector<CheckResult>{check_number_identity(m.basis, c.trials, c.seed)};
    };
    r["pull_through"] = [need](const RunConfig& c, const Model& m) {
      need(c.scan.sigma, "scan.sigma", "pull_through");
      return check_pull_through(m.basis, c.params, m.kernel, c.params.g, c.scan.sigma, solver_options(c));
    };
    r["pull_through_scaling"] = [need](const RunConfig& c, const Model& m) {
      need(c.scan.g, "scan.g", "pull_through_scaling");
      return check_pull_through_scaling(m.basis, c.params, m.kernel, c.params.sigma, c.scan.g, 0.10,
                                        solver_options(c));
    };
    r["overlap"] = [need](const RunConfig& c, const Model& m) {
      need(c.scan.g, "scan.g", "overlap");
      return check_overlap(m.basis, c.params, m.kernel, c.scan.g, c.params.sigma, default_lambda(c),
                           solver_options(c));
    };
    r["cutoff"] = [need](const RunConfig& c, const Model& m) {
      need(c.scan.sigma, "scan.sigma", "cutoff");
      return check_cutoff_convergence(m.basis, c.params, m.kernel, c.scan.sigma, c.trials, c.seed);
    };
    r["mourre"] = [need](const RunConfig& c, const Model& m) {
      need(c.scan.windows, "scan.windows", "mourre");
      return check_mourre(m.basis, c.params, m.kernel, c.scan.g, c.scan.windows);
    };
    r["double_commutator"] = [](const RunConfig& c, const Model& m) {
      return std::vector<CheckResult>{check_double_commutator_bounded(m.basis, c.params, m.kernel)};
    };
    return r;
  }();
  return registry;
}

inline json to_json(const CheckResult& r, const std::string& hash) {
  json ctx = json::object();
  for (const auto& [k, v] : r.context) ctx[k] = std::isfinite(v) ? json(v) : json(fmt(v));
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(fmt(v)); };
  return json{{"config_hash", hash}, {"name", r.name},   {"passed", r.passed}, {"lhs", num(r.lhs)},
              {"rhs", num(r.rhs)},   {"margin", num(r.margin)}, {"context", ctx},     {"note", r.note}};
}

inline int cmd_verify(const RunConfig& c, std::ostream& out, std::ostream& err) {
  if (c.checks.empty()) throw ConfigError("config field 'checks': verify needs at least one check name");
  const auto& registry = check_registry();
  for (const auto& name : c.checks) {
    if (!registry.count(name)) {
      std::string known;
      for (const auto& [k, v] : registry) known += (known.empty() ? "" : ", ") + k;
      throw ConfigError("config field 'checks': unknown check '" + name + "' (known: " + known + ")");
    }
  }
  const Model m = build_model(c);
  const std::string hash = config_hash(c);
  const auto groups = run_jobs<std::vector<CheckResult>>(
      c.checks.size(), c.threads, [&](std::size_t i) { return registry.at(c.checks[i])(c, m); });
  json report = json::array();
  std::size_t failed = 0;
  for (const auto& group : groups) {
    for (const auto& r : group) {
      report.push_back(to_json(r, hash));
      if (!r.passed) {
        ++failed;
        err << "FAIL " << r.name << " lhs=" << fmt(r.lhs) << " rhs=" << fmt(r.rhs)
            << (r.note.empty() ? "" : " (" + r.note + ")") << "\n";
      }
    }
  }
  emit(c, "verify", report.dump(2) + "\n", json{{"records", report.size()}, {"failed", failed}}, out);
  return failed ? kExitCheckFailed : kExitOk;
}

inline int run_command(const std::string& command, const RunConfig& c, std::ostream& out, std::ostream& err) {
  if (command == "build") return cmd_build(c, out, err);
  if (command == "gs-scan") return cmd_gs_scan(c, out, err);
  if (command == "ir-scan") return cmd_ir_scan(c, out, err);
  if (command == "mourre") return cmd_mourre(c, out, err);
  if (command == "verify") return cmd_verify(c, out, err);
  throw ConfigError("unknown command '" + command + "'");
}

/// Loads the config, applies overrides, runs the command and maps errors to
/// exit codes.
inline int main_entry(const std::string& command, const std::string& config_path, const Overrides& o,
                      std::ostream& out, std::ostream& err) {
  try {
    RunConfig c = load_config(config_path);
    apply(c, o);
    return run_command(command, c, out, err);
  } catch (const SolverError& e) {
    err << "solver failure: " << e.what() << " (best residual " << fmt(e.best_residual()) << ")\n";
    return kExitSolver;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ResourceError& e) {
    err << "resource limit: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace fermiweak::cli
