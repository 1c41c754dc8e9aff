// Copyright 2026 The spinhydro Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Experiment configuration (JSON), orchestration of the disorder x
// typicality x time-grid loops, and result persistence with a manifest.

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "spinhydro/engine.hpp"
#include "spinhydro/errors.hpp"
#include "spinhydro/model.hpp"
#include "spinhydro/mqc.hpp"
#include "spinhydro/prep.hpp"
#include "spinhydro/sequence.hpp"
#include "spinhydro/transport.hpp"

namespace spinhydro {

inline constexpr const char *kCodeVersion = "0.1.0";

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

enum class PrepMode { closed_form, full_sequence };
enum class TimeGrid { linear, log };

inline std::string to_string(PrepMode m) { return m == PrepMode::closed_form ? "closed_form" : "full_sequence"; }
inline std::string to_string(TimeGrid g) { return g == TimeGrid::linear ? "linear" : "log"; }
inline std::string to_string(EncodingMode m) { return m == EncodingMode::wahuha8 ? "wahuha8" : "ideal_average"; }

struct PrepConfig {
  ObservableKind kind = ObservableKind::rZ_z;
  std::optional<double> tau_ms;
  std::optional<std::size_t> n_cycles;
  PrepMode mode = PrepMode::closed_form;
  EncodingMode encoding = EncodingMode::wahuha8;
  bool with_pi_control = false;
  bool include_couplings = true;
  double wahuha_tau_us = 5.0;

  /** Encoding time; n_cycles WAHUHA8 cycles when tau_ms is absent. */
  double effective_tau_ms() const {
    if (tau_ms) return *tau_ms;
    if (n_cycles) return static_cast<double>(*n_cycles) * 12.0 * wahuha_tau_us * 1e-3;
    throw ConfigError("prep: set tau_ms or n_cycles");
  }
  std::size_t effective_cycles() const {
    if (n_cycles) return *n_cycles;
    if (tau_ms) {
      const double n = *tau_ms / (12.0 * wahuha_tau_us * 1e-3);
      return static_cast<std::size_t>(std::max(1.0, std::round(n)));
    }
    throw ConfigError("prep: set tau_ms or n_cycles");
  }
};

struct EngineConfig {
  EngineMethod method = EngineMethod::typicality;
  std::size_t n_vectors = 20;
  double tolerance = 1e-8;
  double t_max_over_J = 40.0;
  std::size_t n_points = 81;
  TimeGrid grid = TimeGrid::linear;
  double t_min_over_J = 0.1;  // first non-zero point of a log grid
  std::size_t n_threads = 1;

  /** Grid in units of 1/J, always starting at t = 0. */
  std::vector<double> times() const {
    std::vector<double> t{0.0};
    if (grid == TimeGrid::linear) {
      for (std::size_t k = 1; k < n_points; ++k)
        t.push_back(t_max_over_J * static_cast<double>(k) / static_cast<double>(n_points - 1));
    } else {
      const double r = std::log(t_max_over_J / t_min_over_J);
      for (std::size_t k = 0; k + 1 < n_points; ++k)
        t.push_back(t_min_over_J * std::exp(r * static_cast<double>(k) / static_cast<double>(n_points - 2)));
    }
    return t;
  }
};

struct AnalysisConfig {
  std::vector<std::string> channels{"spin", "energy"};
  std::optional<std::size_t> site;  // default L/2
  std::optional<double> t_start;    // default per channel
  std::vector<double> t_end;
  bool normalize = true;
  bool fit_envelope = false;
  bool diffusion = false;
  std::vector<double> h_list;
  int l_max = kMqcMaxL;
};

struct SeedConfig {
  std::uint64_t base_seed = 1;
  std::size_t n_realizations = 1;
};

struct SequenceConfig {
  double tau0_us = 5.0;
  double pulse_width_us = 1.02;
};

struct OutputConfig {
  std::string directory = "spinhydro_out";
};

struct ExperimentConfig {
  ChainModel model;
  HamiltonianParams params;
  BathModel bath;
  std::string bath_geometry_file;
  PrepConfig prep;
  EngineConfig engine;
  AnalysisConfig analysis;
  SeedConfig seeds;
  SequenceConfig sequence;
  OutputConfig output;

  std::size_t site() const { return analysis.site ? *analysis.site : model.L / 2; }

  /** Bath with the geometry file resolved. */
  BathModel resolved_bath() const {
    BathModel b = bath;
    if (!bath_geometry_file.empty()) b.geometry = load_bath_geometry(bath_geometry_file);
    if (b.geometry.empty()) b.geometry = default_bath_geometry(b.fp_coupling_krad);
    return b;
  }

  /** Per-realization seeds: base_seed + r. */
  std::vector<std::uint64_t> realization_seeds() const {
    std::vector<std::uint64_t> s;
    for (std::size_t r = 0; r < seeds.n_realizations; ++r) s.push_back(seeds.base_seed + r);
    return s;
  }

  /** Throws one ConfigError listing every problem found. */
  void validate() const {
    std::vector<std::string> problems;
    auto check = [&](const std::string &section, auto &&f) {
      try {
        f();
      } catch (const std::exception &e) {
        problems.push_back(section + ": " + e.what());
      }
    };
    check("model", [&] { model.validate(); });
    check("params", [&] { params.validate(); });
    check("bath", [&] {
      if (bath_geometry_file.empty()) bath.validate();
      else resolved_bath().validate();
    });
    if (engine.n_points < 2) problems.push_back("engine: n_points must be >= 2");
    if (!(engine.t_max_over_J > 0.0)) problems.push_back("engine: t_max_over_J must be > 0");
    if (!(engine.tolerance > 0.0)) problems.push_back("engine: tolerance must be > 0");
    if (engine.grid == TimeGrid::log &&
        !(engine.t_min_over_J > 0.0 && engine.t_min_over_J < engine.t_max_over_J))
      problems.push_back("engine: log grid needs 0 < t_min_over_J < t_max_over_J");
    if (engine.grid == TimeGrid::log && engine.n_points < 3)
      problems.push_back("engine: log grid needs n_points >= 3");
    if (engine.method == EngineMethod::typicality && engine.n_vectors < 1)
      problems.push_back("engine: n_vectors must be >= 1");
    if (seeds.n_realizations < 1) problems.push_back("seeds: n_realizations must be >= 1");
    if (site() >= model.L) problems.push_back("analysis: site outside the chain");
    for (const auto &c : analysis.channels)
      if (c != "spin" && c != "energy") problems.push_back("analysis: unknown channel '" + c + "'");
    for (double te : analysis.t_end)
      if (!(te > 0.0) || te > engine.t_max_over_J + 1e-12)
        problems.push_back("analysis: t_end " + std::to_string(te) + " outside (0, t_max_over_J]");
    if (analysis.t_start && !(*analysis.t_start > 0.0)) problems.push_back("analysis: t_start must be > 0");
    if (analysis.l_max < 0 || analysis.l_max > kMqcMaxL) problems.push_back("analysis: l_max must lie in [0, 3]");
    if (prep.tau_ms && !(*prep.tau_ms > 0.0)) problems.push_back("prep: tau_ms must be > 0");
    if (prep.n_cycles && *prep.n_cycles < 1) problems.push_back("prep: n_cycles must be >= 1");
    if (!(sequence.tau0_us > 0.0)) problems.push_back("sequence: tau0_us must be > 0");
    if (sequence.pulse_width_us < 0.0) problems.push_back("sequence: pulse_width_us must be >= 0");
    if (output.directory.empty()) problems.push_back("output: directory must not be empty");
    if (!problems.empty()) {
      std::string msg = "invalid configuration:";
      for (const auto &p : problems) msg += "\n  - " + p;
      throw ConfigError(msg);
    }
  }
};

namespace detail {

inline void check_keys(const json &j, const std::string &section, std::initializer_list<const char *> allowed) {
  if (!j.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto &[k, _] : j.items())
    if (!ok.count(k)) throw ConfigError("unknown key '" + k + "' in config section '" + section + "'");
}

template <class T>
void read(const json &j, const char *key, T &dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

template <class T>
void read_opt(const json &j, const char *key, std::optional<T> &dst) {
  if (j.contains(key)) {
    if (j.at(key).is_null()) dst.reset();
    else dst = j.at(key).get<T>();
  }
}

template <class T>
json opt_json(const std::optional<T> &v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace detail

inline json to_json(const ExperimentConfig &c) {
  json j;
  j["model"] = {{"L", c.model.L},
                {"J", c.model.J},
                {"coupling_range", c.model.coupling_range == kAllPairs ? json("all") : json(c.model.coupling_range)},
                {"boundary", c.model.boundary == Boundary::open ? "open" : "periodic"},
                {"lattice_constant_angstrom", c.model.lattice_constant_angstrom}};
  j["params"] = {{"u", c.params.u}, {"v", c.params.v}, {"h", c.params.h}};
  json geo = json::array();
  for (const auto &g : c.bath.geometry)
    geo.push_back({{"offset", g.offset}, {"coupling_krad", g.coupling_krad}, {"label", g.label}});
  j["bath"] = {{"fp_coupling_krad", c.bath.fp_coupling_krad},
               {"n_neighbors", c.bath.n_neighbors},
               {"mode", to_string(c.bath.mode)},
               {"width_krad", c.bath.width_krad},
               {"component_width_krad", c.bath.component_width_krad},
               {"confine_to_chain", c.bath.confine_to_chain},
               {"geometry", geo},
               {"geometry_file", c.bath_geometry_file}};
  j["prep"] = {{"kind", to_string(c.prep.kind)},
               {"tau_ms", detail::opt_json(c.prep.tau_ms)},
               {"n_cycles", detail::opt_json(c.prep.n_cycles)},
               {"mode", to_string(c.prep.mode)},
               {"encoding", to_string(c.prep.encoding)},
               {"with_pi_control", c.prep.with_pi_control},
               {"include_couplings", c.prep.include_couplings},
               {"wahuha_tau_us", c.prep.wahuha_tau_us}};
  j["engine"] = {{"method", to_string(c.engine.method)},
                 {"n_vectors", c.engine.n_vectors},
                 {"tolerance", c.engine.tolerance},
                 {"t_max_over_J", c.engine.t_max_over_J},
                 {"n_points", c.engine.n_points},
                 {"grid", to_string(c.engine.grid)},
                 {"t_min_over_J", c.engine.t_min_over_J},
                 {"n_threads", c.engine.n_threads}};
  j["analysis"] = {{"channels", c.analysis.channels},
                   {"site", detail::opt_json(c.analysis.site)},
                   {"t_start", detail::opt_json(c.analysis.t_start)},
                   {"t_end", c.analysis.t_end},
                   {"normalize", c.analysis.normalize},
                   {"fit_envelope", c.analysis.fit_envelope},
                   {"diffusion", c.analysis.diffusion},
                   {"h_list", c.analysis.h_list},
                   {"l_max", c.analysis.l_max}};
  j["seeds"] = {{"base_seed", c.seeds.base_seed}, {"n_realizations", c.seeds.n_realizations}};
  j["sequence"] = {{"tau0_us", c.sequence.tau0_us}, {"pulse_width_us", c.sequence.pulse_width_us}};
  j["output"] = {{"directory", c.output.directory}};
  return j;
}

inline ExperimentConfig config_from_json(const json &j) {
  using detail::read;
  using detail::read_opt;
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  detail::check_keys(j, "<root>",
                     {"model", "params", "bath", "prep", "engine", "analysis", "seeds", "sequence", "output"});
  ExperimentConfig c;
  try {
    if (j.contains("model")) {
      const auto &m = j["model"];
      detail::check_keys(m, "model", {"L", "J", "coupling_range", "boundary", "lattice_constant_angstrom"});
      read(m, "L", c.model.L);
      read(m, "J", c.model.J);
      if (m.contains("coupling_range")) {
        if (m["coupling_range"].is_string()) {
          if (m["coupling_range"].get<std::string>() != "all")
            throw ConfigError("model.coupling_range must be an integer or \"all\"");
          c.model.coupling_range = kAllPairs;
        } else {
          c.model.coupling_range = m["coupling_range"].get<std::size_t>();
        }
      }
      if (m.contains("boundary")) {
        const auto b = m["boundary"].get<std::string>();
        if (b == "open") c.model.boundary = Boundary::open;
        else if (b == "periodic") c.model.boundary = Boundary::periodic;
        else throw ConfigError("model.boundary must be open or periodic");
      }
      read(m, "lattice_constant_angstrom", c.model.lattice_constant_angstrom);
    }
    if (j.contains("params")) {
      const auto &p = j["params"];
      detail::check_keys(p, "params", {"u", "v", "h"});
      read(p, "u", c.params.u);
      read(p, "v", c.params.v);
      read(p, "h", c.params.h);
    }
    if (j.contains("bath")) {
      const auto &b = j["bath"];
      detail::check_keys(b, "bath",
                         {"fp_coupling_krad", "n_neighbors", "mode", "width_krad", "component_width_krad",
                          "confine_to_chain", "geometry", "geometry_file"});
      read(b, "fp_coupling_krad", c.bath.fp_coupling_krad);
      read(b, "n_neighbors", c.bath.n_neighbors);
      if (b.contains("mode")) c.bath.mode = parse_bath_mode(b["mode"].get<std::string>());
      read(b, "width_krad", c.bath.width_krad);
      read(b, "component_width_krad", c.bath.component_width_krad);
      read(b, "confine_to_chain", c.bath.confine_to_chain);
      if (b.contains("geometry")) {
        for (const auto &g : b["geometry"]) {
          detail::check_keys(g, "bath.geometry", {"offset", "coupling_krad", "label"});
          BathNeighbor n;
          n.offset = g.at("offset").get<double>();
          n.coupling_krad = g.at("coupling_krad").get<double>();
          read(g, "label", n.label);
          c.bath.geometry.push_back(n);
        }
      }
      read(b, "geometry_file", c.bath_geometry_file);
    }
    if (j.contains("prep")) {
      const auto &p = j["prep"];
      detail::check_keys(p, "prep",
                         {"kind", "tau_ms", "n_cycles", "mode", "encoding", "with_pi_control",
                          "include_couplings", "wahuha_tau_us"});
      if (p.contains("kind")) c.prep.kind = parse_observable_kind(p["kind"].get<std::string>());
      read_opt(p, "tau_ms", c.prep.tau_ms);
      read_opt(p, "n_cycles", c.prep.n_cycles);
      if (p.contains("mode")) {
        const auto m = p["mode"].get<std::string>();
        if (m == "closed_form") c.prep.mode = PrepMode::closed_form;
        else if (m == "full_sequence") c.prep.mode = PrepMode::full_sequence;
        else throw ConfigError("prep.mode must be closed_form or full_sequence");
      }
      if (p.contains("encoding")) c.prep.encoding = parse_encoding_mode(p["encoding"].get<std::string>());
      read(p, "with_pi_control", c.prep.with_pi_control);
      read(p, "include_couplings", c.prep.include_couplings);
      read(p, "wahuha_tau_us", c.prep.wahuha_tau_us);
    }
    if (j.contains("engine")) {
      const auto &e = j["engine"];
      detail::check_keys(e, "engine",
                         {"method", "n_vectors", "tolerance", "t_max_over_J", "n_points", "grid", "t_min_over_J",
                          "n_threads"});
      if (e.contains("method")) c.engine.method = parse_engine_method(e["method"].get<std::string>());
      read(e, "n_vectors", c.engine.n_vectors);
      read(e, "tolerance", c.engine.tolerance);
      read(e, "t_max_over_J", c.engine.t_max_over_J);
      read(e, "n_points", c.engine.n_points);
      if (e.contains("grid")) {
        const auto g = e["grid"].get<std::string>();
        if (g == "linear") c.engine.grid = TimeGrid::linear;
        else if (g == "log") c.engine.grid = TimeGrid::log;
        else throw ConfigError("engine.grid must be linear or log");
      }
      read(e, "t_min_over_J", c.engine.t_min_over_J);
      read(e, "n_threads", c.engine.n_threads);
    }
    if (j.contains("analysis")) {
      const auto &a = j["analysis"];
      detail::check_keys(a, "analysis",
                         {"channels", "site", "t_start", "t_end", "normalize", "fit_envelope", "diffusion", "h_list",
                          "l_max"});
      read(a, "channels", c.analysis.channels);
      read_opt(a, "site", c.analysis.site);
      read_opt(a, "t_start", c.analysis.t_start);
      read(a, "t_end", c.analysis.t_end);
      read(a, "normalize", c.analysis.normalize);
      read(a, "fit_envelope", c.analysis.fit_envelope);
      read(a, "diffusion", c.analysis.diffusion);
      read(a, "h_list", c.analysis.h_list);
      read(a, "l_max", c.analysis.l_max);
    }
    if (j.contains("seeds")) {
      const auto &s = j["seeds"];
      detail::check_keys(s, "seeds", {"base_seed", "n_realizations"});
      read(s, "base_seed", c.seeds.base_seed);
      read(s, "n_realizations", c.seeds.n_realizations);
    }
    if (j.contains("sequence")) {
      const auto &s = j["sequence"];
      detail::check_keys(s, "sequence", {"tau0_us", "pulse_width_us"});
      read(s, "tau0_us", c.sequence.tau0_us);
      read(s, "pulse_width_us", c.sequence.pulse_width_us);
    }
    if (j.contains("output")) {
      const auto &o = j["output"];
      detail::check_keys(o, "output", {"directory"});
      read(o, "directory", c.output.directory);
    }
  } catch (const json::exception &e) {
    throw ConfigError(std::string("config type error: ") + e.what());
  }
  return c;
}

inline ExperimentConfig parse_config(const std::string &text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error &e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

inline ExperimentConfig load_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline std::string serialize_config(const ExperimentConfig &c) { return to_json(c).dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Output and manifest

inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t x) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << x;
  return os.str();
}

struct FileEntry {
  std::string path;  // relative to the output directory
  std::size_t bytes = 0;
  std::string fnv1a;
};

struct ResultManifest {
  std::string command;
  std::string config_hash;
  std::string code_version = kCodeVersion;
  std::vector<std::uint64_t> seeds;
  std::vector<FileEntry> files;
  double wall_clock_s = 0.0;
  json summary = json::object();
};

inline json to_json(const ResultManifest &m) {
  json j;
  j["command"] = m.command;
  j["config_hash"] = m.config_hash;
  j["code_version"] = m.code_version;
  j["seeds"] = m.seeds;
  j["files"] = json::array();
  for (const auto &f : m.files) j["files"].push_back({{"path", f.path}, {"bytes", f.bytes}, {"fnv1a", f.fnv1a}});
  j["wall_clock_s"] = m.wall_clock_s;
  j["summary"] = m.summary;
  return j;
}

/** Hash over the canonical config text, the seeds and the code version. */
inline std::string config_hash(const ExperimentConfig &c, const std::vector<std::uint64_t> &seeds) {
  std::string blob = to_json(c).dump();
  for (auto s : seeds) blob += "|" + std::to_string(s);
  blob += "|";
  blob += kCodeVersion;
  return hex64(fnv1a(blob));
}

/** Single owner of an output directory; records every file it writes. */
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir_.string() + "': " + ec.message());
  }

  void write(const std::string &rel, const std::string &content) {
    const auto path = dir_ / rel;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << content;
    files_.push_back({rel, content.size(), hex64(fnv1a(content))});
  }

  const std::filesystem::path &path() const { return dir_; }
  const std::vector<FileEntry> &files() const { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<FileEntry> files_;
};

namespace detail {

inline std::string curve_csv(const CorrelationCurve &c) {
  std::ostringstream os;
  write_curve_csv(os, c);
  return os.str();
}

inline ResultManifest finish(const std::string &command, const ExperimentConfig &cfg, OutputDir &out,
                             const std::vector<std::uint64_t> &seeds, json summary,
                             std::chrono::steady_clock::time_point t0) {
  out.write("config.json", serialize_config(cfg));
  ResultManifest m;
  m.command = command;
  m.seeds = seeds;
  m.config_hash = config_hash(cfg, seeds);
  m.files = out.files();
  m.summary = std::move(summary);
  m.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream f(out.path() / "manifest.json");
  f << to_json(m).dump(2) << "\n";
  return m;
}

inline std::string format_h(double h) {
  std::ostringstream os;
  os << "h_" << std::setprecision(6) << h;
  return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Transport

/** Disorder-averaged local and global curves of one channel. */
struct ChannelResult {
  std::string channel;
  CorrelationCurve local;
  CorrelationCurve global;
  std::optional<CorrelationCurve> normalized;
  std::string global_observable;
};

namespace detail {

inline CorrelationCurve average_curves(const std::vector<CorrelationCurve> &curves, const std::string &label) {
  if (curves.size() == 1) {
    CorrelationCurve c = curves.front();
    c.label = label;
    return c;
  }
  std::vector<std::vector<double>> samples;
  for (const auto &c : curves) samples.push_back(c.values);
  auto out = reduce_samples(samples, curves.front().times, label);
  // n_samples counts the underlying vectors
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::size_t n = 0;
    for (const auto &c : curves) n += c.n_samples.empty() ? 1 : c.n_samples[k];
    out.n_samples[k] = n;
  }
  return out;
}

inline CorrelationCurve constant_curve(const std::vector<double> &t, double value, const std::string &label) {
  CorrelationCurve c;
  c.label = label;
  c.times = t;
  c.values.assign(t.size(), value);
  c.stderrs.assign(t.size(), 0.0);
  c.n_samples.assign(t.size(), 1);
  return c;
}

inline bool commutes(const OperatorSum &a, const OperatorSum &b) {
  return commutator(a, b).pruned(1e-12).norm2() < 1e-20;
}

}  // namespace detail

/**
 * Runs the disorder loop for the configured channels. Hamiltonians are in
 * units of J. Global curves are per site: the conserved total (uniform or
 * staggered S_z; H for energy) is constant and evaluated exactly, otherwise
 * it is propagated with the same method.
 */
inline std::vector<ChannelResult> compute_channels(const ExperimentConfig &cfg) {
  cfg.validate();
  const auto t = cfg.engine.times();
  const auto bath = cfg.resolved_bath();
  const std::size_t L = cfg.model.L;
  const auto site = static_cast<std::uint32_t>(cfg.site());
  const auto seeds = cfg.realization_seeds();
  std::vector<ChannelResult> results;
  for (const auto &ch : cfg.analysis.channels) {
    if (ch == "energy" && cfg.engine.method == EngineMethod::free_fermion)
      throw ConfigError("free_fermion method supports the spin channel only");
    ChannelResult r;
    r.channel = ch;
    results.push_back(r);
  }
  std::vector<std::vector<CorrelationCurve>> local(results.size()), global(results.size());
  for (std::uint64_t seed : seeds) {
    DisorderRealization dis;
    if (cfg.params.h != 0.0) {
      dis = draw_disorder(bath, cfg.model, seed);
    } else {
      dis.w.assign(L, 0.0);
      dis.seed = seed;
    }
    const OperatorSum h = (build_tunable(cfg.model, cfg.params, dis) * (1.0 / cfg.model.J)).pruned();
    for (std::size_t c = 0; c < results.size(); ++c) {
      EvolutionJob job;
      job.H = h;
      job.t_grid = t;
      job.method = cfg.engine.method;
      job.n_vectors = cfg.engine.n_vectors;
      job.tolerance = cfg.engine.tolerance;
      job.seed = seed;
      job.n_threads = cfg.engine.n_threads;
      OperatorSum g(L);
      if (results[c].channel == "spin") {
        job.A = spin(L, site, Pauli::Z);
        const auto uniform = collective_spin(L, Pauli::Z);
        const auto staggered = staggered_spin_z(L);
        if (detail::commutes(h, uniform)) {
          g = uniform;
          results[c].global_observable = "uniform_sz";
        } else if (detail::commutes(h, staggered)) {
          g = staggered;
          results[c].global_observable = "staggered_sz";
        } else {
          g = uniform;
          results[c].global_observable = "uniform_sz";
        }
      } else {
        job.A = local_energy(h, site);
        g = h;
        results[c].global_observable = "hamiltonian";
      }
      job.B = job.A;
      local[c].push_back(evolve_correlation(job));
      if (detail::commutes(h, g)) {
        global[c].push_back(detail::constant_curve(t, g.norm2() / static_cast<double>(L), "global"));
      } else {
        if (cfg.engine.method == EngineMethod::free_fermion)
          throw ConfigError("free_fermion: the global observable is not conserved");
        job.A = g * (1.0 / std::sqrt(static_cast<double>(L)));
        job.B = job.A;
        global[c].push_back(evolve_correlation(job));
      }
    }
  }
  for (std::size_t c = 0; c < results.size(); ++c) {
    results[c].local = detail::average_curves(local[c], results[c].channel + "_local");
    results[c].global = detail::average_curves(global[c], results[c].channel + "_global");
    if (cfg.analysis.normalize)
      results[c].normalized = normalize_by_global(results[c].local, results[c].global);
  }
  return results;
}

namespace detail {

/** Fits per window end; failing windows are reported, not fatal. */
inline json fit_channel(const ExperimentConfig &cfg, const ChannelResult &r, std::vector<ExponentFit> *fits_out) {
  const CorrelationCurve &curve = r.normalized ? *r.normalized : r.local;
  const double ts = cfg.analysis.t_start ? *cfg.analysis.t_start
                                         : (r.channel == "spin" ? kSpinFitStart : kEnergyFitStart);
  FitOptions opt;
  opt.use_envelope = cfg.analysis.fit_envelope;
  json out;
  out["t_start"] = ts;
  out["global_observable"] = r.global_observable;
  out["fits"] = json::array();
  for (double te : cfg.analysis.t_end) {
    try {
      const auto f = fit_exponent(curve, ts, te, opt);
      out["fits"].push_back(to_json(f));
      if (fits_out) fits_out->push_back(f);
    } catch (const std::exception &e) {
      out["fits"].push_back({{"window", {ts, te}}, {"error", e.what()}});
    }
  }
  if (cfg.analysis.diffusion && r.channel == "spin") {
    try {
      const double te = std::min(kDiffusionFitEnd, cfg.engine.t_max_over_J);
      const auto f = fit_diffusive(curve, kDiffusionFitStart, te, opt);
      auto jd = to_json(f);
      jd["D_lattice_units"] = diffusion_constant(f);
      jd["D_nm2_per_ms"] = diffusion_constant_nm2_per_ms(f, cfg.model);
      out["diffusive"] = jd;
    } catch (const std::exception &e) {
      out["diffusive"] = {{"error", e.what()}};
    }
  }
  return out;
}

inline json write_channels(const ExperimentConfig &cfg, OutputDir &out, const std::string &prefix,
                           const std::vector<ChannelResult> &res, bool write_sweep) {
  json summary;
  for (const auto &r : res) {
    out.write(prefix + r.channel + "_raw.csv", curve_csv(r.local));
    out.write(prefix + r.channel + "_global.csv", curve_csv(r.global));
    if (r.normalized) out.write(prefix + r.channel + "_normalized.csv", curve_csv(*r.normalized));
    std::vector<ExponentFit> fits;
    summary[r.channel] = fit_channel(cfg, r, &fits);
    if (write_sweep) {
      std::ostringstream os;
      write_sweep_csv(os, fits);
      out.write(prefix + "sweep_" + r.channel + ".csv", os.str());
    }
  }
  out.write(prefix + "fits.json", summary.dump(2) + "\n");
  return summary;
}

}  // namespace detail

inline ResultManifest run_transport(const ExperimentConfig &cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  OutputDir out(cfg.output.directory);
  const auto res = compute_channels(cfg);
  json summary = detail::write_channels(cfg, out, "", res, false);
  return detail::finish("transport", cfg, out, cfg.realization_seeds(), summary, t0);
}

/** z(t_end) per h value of analysis.h_list (params.h when the list is empty). */
inline ResultManifest run_exponent_sweep(const ExperimentConfig &cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  if (cfg.analysis.t_end.empty()) throw ConfigError("sweep: analysis.t_end must list at least one window end");
  OutputDir out(cfg.output.directory);
  std::vector<double> hs = cfg.analysis.h_list;
  if (hs.empty()) hs.push_back(cfg.params.h);
  json summary = json::object();
  for (double h : hs) {
    ExperimentConfig c = cfg;
    c.params.h = h;
    const auto res = compute_channels(c);
    const std::string prefix = detail::format_h(h) + "/";
    summary[detail::format_h(h)] = detail::write_channels(c, out, prefix, res, true);
  }
  return detail::finish("sweep", cfg, out, cfg.realization_seeds(), summary, t0);
}

// ---------------------------------------------------------------------------
// Compile

struct CompileReport {
  CompileResult result;
  PulseSequence sequence;        // with the configured pulse width
  double order0_residual = 0.0;  // relative Frobenius error of the average Hamiltonian
  double interaction_zero_sum = 0.0;
  std::optional<FiniteCycleReport> finite;
};

/**
 * Compiles target params into a 16-pulse sequence and checks the order-0
 * average against the target on the configured chain with one disorder
 * draw; the finite-width cycle is simulated when L <= finite_limit.
 */
inline CompileReport compile_and_verify(const ExperimentConfig &cfg, std::size_t finite_limit = 8) {
  cfg.validate();
  CompileReport rep;
  rep.result = compile_target(cfg.model, cfg.params, cfg.sequence.tau0_us, cfg.sequence.pulse_width_us);
  rep.sequence = sixteen_pulse(rep.result.params, cfg.sequence.pulse_width_us);
  const auto dis = draw_disorder(cfg.resolved_bath(), cfg.model, cfg.seeds.base_seed);
  const OperatorSum raw = build_dipolar(cfg.model) + build_field(cfg.model.L, dis.w);
  const OperatorSum avg = average_hamiltonian(sixteen_pulse(rep.result.params, 0.0), raw, 0);
  const OperatorSum target = build_tunable(cfg.model, cfg.params, dis);
  const double diff = (avg - target).norm2();
  const double tn = target.norm2();
  rep.order0_residual = tn > 0.0 ? std::sqrt(diff / tn) : std::sqrt(diff);
  rep.interaction_zero_sum = interaction_zero_sum_residual(avg);
  if (cfg.model.L <= finite_limit) rep.finite = simulate_finite_pulses(rep.sequence, raw, cfg.model.L);
  return rep;
}

inline json to_json(const CompileReport &r) {
  json j;
  const auto &p = r.result.params;
  j["params"] = {{"u", p.u}, {"v", p.v}, {"w", p.w}, {"a", p.a}, {"b", p.b}, {"c", p.c}, {"tau0_us", p.tau0}};
  j["gauge"] = r.result.gauge;
  j["pulse_width_us"] = r.result.pulse_width_us;
  json delays = json::object();
  for (const auto &[name, value] : r.result.delays.named()) delays[name] = value;
  j["delays_us"] = delays;
  j["cycle_time_us"] = r.sequence.cycle_time_us();
  j["order0_relative_residual"] = r.order0_residual;
  j["interaction_zero_sum_residual"] = r.interaction_zero_sum;
  if (r.finite) {
    j["finite_pulse"] = {{"cycle_time_us", r.finite->cycle_time_us},
                         {"distance", r.finite->distance},
                         {"residual_krad_per_s", r.finite->residual}};
  }
  return j;
}

inline ResultManifest run_compile(const ExperimentConfig &cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rep = compile_and_verify(cfg);
  OutputDir out(cfg.output.directory);
  out.write("sequence.json", to_json(rep.sequence).dump(2) + "\n");
  const json report = to_json(rep);
  out.write("compile_report.json", report.dump(2) + "\n");
  return detail::finish("compile", cfg, out, {cfg.seeds.base_seed}, report, t0);
}

// ---------------------------------------------------------------------------
// Preparation

/** Random observable of one realization per the prep section. */
inline PrepResult prepare_observable(const ExperimentConfig &cfg, const DisorderRealization &dis) {
  const auto &p = cfg.prep;
  if (p.mode == PrepMode::closed_form) {
    PrepResult r;
    const double tau = p.effective_tau_ms();
    if (is_zeeman(p.kind)) {
      const Pauli axis = p.kind == ObservableKind::rZ_x   ? Pauli::X
                         : p.kind == ObservableKind::rZ_y ? Pauli::Y
                                                          : Pauli::Z;
      r.observable = closed_form_rz(dis, tau, axis);
    } else {
      r.observable = closed_form_rdq(dis, tau, p.kind, cfg.model.boundary, cfg.model.coupling_range);
    }
    r.closed_form_overlap = 1.0;
    return r;
  }
  PrepOptions opt;
  opt.with_pi_control = p.with_pi_control;
  opt.encoding = p.encoding;
  opt.include_couplings = p.include_couplings;
  opt.wahuha_tau_us = p.wahuha_tau_us;
  return simulate_prep_sequence(p.kind, cfg.model, dis, p.effective_cycles(), opt);
}

/** Full sequence against the closed form for each realization, plus the pi control. */
inline ResultManifest run_prep_verify(const ExperimentConfig &cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  OutputDir out(cfg.output.directory);
  const auto bath = cfg.resolved_bath();
  ExperimentConfig full = cfg;
  full.prep.mode = PrepMode::full_sequence;
  full.prep.with_pi_control = false;
  ExperimentConfig control = full;
  control.prep.with_pi_control = true;
  json rows = json::array();
  for (auto seed : cfg.realization_seeds()) {
    const auto dis = draw_disorder(bath, cfg.model, seed);
    const auto sim = prepare_observable(full, dis);
    const auto ctl = prepare_observable(control, dis);
    ExperimentConfig cf = full;
    cf.prep.mode = PrepMode::closed_form;
    cf.prep.tau_ms = sim.observable.tau_ms;
    const auto ref = prepare_observable(cf, dis);
    double max_err = 0.0;
    for (std::size_t k = 0; k < ref.observable.coeffs.size() && k < sim.observable.coeffs.size(); ++k)
      max_err = std::max(max_err, std::abs(ref.observable.coeffs[k] - sim.observable.coeffs[k]));
    const double n_sim = std::sqrt(sim.observable.op.norm2());
    const double n_ctl = std::sqrt(ctl.observable.op.norm2());
    rows.push_back({{"seed", seed},
                    {"tau_ms", sim.observable.tau_ms},
                    {"closed_form_overlap", sim.closed_form_overlap},
                    {"max_coefficient_error", max_err},
                    {"norm", n_sim},
                    {"pi_control_norm", n_ctl},
                    {"pi_control_ratio", n_sim > 0.0 ? n_ctl / n_sim : 0.0},
                    {"jb_time_ms", sim.jb_time_ms},
                    {"simulated_coefficients", sim.observable.coeffs},
                    {"closed_form_coefficients", ref.observable.coeffs}});
  }
  json summary = {{"kind", to_string(cfg.prep.kind)}, {"encoding", to_string(cfg.prep.encoding)}, {"realizations", rows}};
  out.write("prep_verify.json", summary.dump(2) + "\n");
  json brief = json::array();
  for (const auto &r : rows)
    brief.push_back({{"seed", r["seed"]}, {"closed_form_overlap", r["closed_form_overlap"]},
                     {"pi_control_ratio", r["pi_control_ratio"]}});
  return detail::finish("prep-verify", cfg, out, cfg.realization_seeds(), brief, t0);
}

// ---------------------------------------------------------------------------
// MQC

/** Scan averaged over realizations of the configured random observable. */
inline RotationScan simulate_mqc_scan(const ExperimentConfig &cfg) {
  cfg.validate();
  const auto bath = cfg.resolved_bath();
  RotationScan avg;
  avg.L = cfg.model.L;
  const auto seeds = cfg.realization_seeds();
  for (auto seed : seeds) {
    const auto dis = draw_disorder(bath, cfg.model, seed);
    const auto obs = prepare_observable(cfg, dis).observable;
    const auto scan = synthesize_scan(obs);
    for (std::size_t i = 0; i < avg.values.size(); ++i) avg.values[i] += scan.values[i];
  }
  for (auto &v : avg.values) v /= static_cast<double>(seeds.size());
  return avg;
}

inline ResultManifest run_mqc(const ExperimentConfig &cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto scan = simulate_mqc_scan(cfg);
  OutputDir out(cfg.output.directory);
  std::ostringstream os;
  write_scan_csv(os, scan);
  out.write("scan.csv", os.str());
  const auto spec = extract_correlation(scan, cfg.analysis.l_max);
  const json sj = to_json(spec);
  out.write("spectrum.json", sj.dump(2) + "\n");
  json brief = {{"eigenvalues", spec.eigenvalues}, {"residual", spec.residual}};
  if (!spec.components.empty()) brief["leading_component"] = to_text(spec.components.front().op);
  return detail::finish("mqc", cfg, out, cfg.realization_seeds(), brief, t0);
}

/** Spectrum from an external scan CSV; L is the chain length of the sample. */
inline ResultManifest run_mqc_from_csv(const ExperimentConfig &cfg, const std::string &scan_path) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  std::ifstream in(scan_path);
  if (!in) throw ConfigError("cannot open scan CSV '" + scan_path + "'");
  const auto scan = read_scan_csv(in, cfg.model.L);
  const auto spec = extract_correlation(scan, cfg.analysis.l_max);
  OutputDir out(cfg.output.directory);
  out.write("spectrum.json", to_json(spec).dump(2) + "\n");
  json brief = {{"eigenvalues", spec.eigenvalues}, {"residual", spec.residual}, {"scan", scan_path}};
  return detail::finish("mqc", cfg, out, {}, brief, t0);
}

// ---------------------------------------------------------------------------
// Disorder statistics

inline ResultManifest run_disorder_stats(const ExperimentConfig &cfg, std::size_t n_samples) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  const auto bath = cfg.resolved_bath();
  const auto st = bath_statistics(bath, cfg.model, n_samples, cfg.seeds.base_seed);
  OutputDir out(cfg.output.directory);
  std::ostringstream hist;
  hist << "bin_lo_krad,bin_hi_krad,count\n" << std::setprecision(17);
  for (std::size_t b = 0; b < st.counts.size(); ++b)
    hist << st.bin_edges[b] << ',' << st.bin_edges[b + 1] << ',' << st.counts[b] << '\n';
  out.write("field_histogram.csv", hist.str());
  std::ostringstream deph;
  deph << "tau_ms,mean_cos_w_tau\n" << std::setprecision(17);
  for (std::size_t k = 0; k < st.tau_ms.size(); ++k) deph << st.tau_ms[k] << ',' << st.dephasing[k] << '\n';
  out.write("dephasing.csv", deph.str());
  json j = {{"n_samples", st.n_samples},
            {"mode", to_string(bath.mode)},
            {"mean_krad", st.mean},
            {"std_krad", std::sqrt(st.variance)},
            {"neighbor_correlation", st.neighbor_correlation},
            {"neighbor_correlation_stderr", st.neighbor_correlation_stderr}};
  out.write("disorder_stats.json", j.dump(2) + "\n");
  return detail::finish("disorder-stats", cfg, out, {cfg.seeds.base_seed}, j, t0);
}

}  // namespace spinhydro
