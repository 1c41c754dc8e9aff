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

// spinhydro command-line front end.
// Exit codes: 0 success, 1 configuration error, 2 numerical failure.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "spinhydro/spinhydro.hpp"

namespace {

using namespace spinhydro;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

/** Flags shared by every subcommand; unset flags leave file values alone. */
struct Overrides {
  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::size_t> L;
  std::optional<double> J;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> realizations;
  std::optional<double> u, v, h;
  std::optional<std::string> method;
  std::optional<std::size_t> n_vectors;
  std::optional<double> t_max;
  std::optional<double> t_max_ms;
  std::optional<std::size_t> n_points;
  std::optional<std::size_t> threads;
  std::optional<int> l_max;

  void add_to(CLI::App *app, bool engine_flags) {
    app->add_option("-c,--config", config_path, "JSON experiment configuration");
    app->add_option("-o,--out", out, "output directory");
    app->add_option("--L", L, "chain length");
    app->add_option("--J", J, "coupling constant J in krad/s");
    app->add_option("--seed", seed, "base seed");
    app->add_option("--realizations", realizations, "number of disorder realizations");
    app->add_option("--u", u, "Hamiltonian parameter u");
    app->add_option("--v", v, "Hamiltonian parameter v");
    app->add_option("--h", h, "disorder strength h");
    if (engine_flags) {
      app->add_option("--method", method, "dense | krylov | typicality | free_fermion");
      app->add_option("--n-vectors", n_vectors, "typicality vectors per realization");
      app->add_option("--t-max", t_max, "largest time in units of 1/J");
      app->add_option("--t-max-ms", t_max_ms, "largest time in ms (converted with J)");
      app->add_option("--n-points", n_points, "number of time points");
      app->add_option("--threads", threads, "threads per propagation");
    }
  }

  ExperimentConfig build() const {
    ExperimentConfig c = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    if (out) c.output.directory = *out;
    if (L) c.model.L = *L;
    if (J) c.model.J = *J;
    if (seed) c.seeds.base_seed = *seed;
    if (realizations) c.seeds.n_realizations = *realizations;
    if (u) c.params.u = *u;
    if (v) c.params.v = *v;
    if (h) c.params.h = *h;
    if (method) c.engine.method = parse_engine_method(*method);
    if (n_vectors) c.engine.n_vectors = *n_vectors;
    if (t_max) c.engine.t_max_over_J = *t_max;
    if (t_max_ms) c.engine.t_max_over_J = *t_max_ms * std::abs(c.model.J);
    if (n_points) c.engine.n_points = *n_points;
    if (threads) c.engine.n_threads = *threads;
    if (l_max) c.analysis.l_max = *l_max;
    return c;
  }
};

void report(const ResultManifest &m) {
  std::cout << m.command << ": wrote " << m.files.size() << " files, config hash " << m.config_hash << "\n";
  std::cout << m.summary.dump(2) << "\n";
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"spinhydro: spin and energy transport in disordered dipolar spin chains"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "print this help and exit");  // -h is the disorder strength

  Overrides transport_o, sweep_o, compile_o, mqc_o, stats_o, prep_o;
  auto *transport = app.add_subcommand("transport", "local spin/energy autocorrelations and exponent fits");
  transport_o.add_to(transport, true);
  auto *sweep = app.add_subcommand("sweep", "z(t_end) per disorder strength in analysis.h_list");
  sweep_o.add_to(sweep, true);

  auto *compile = app.add_subcommand("compile", "compile target (u, v, h) into a 16-pulse sequence");
  compile_o.add_to(compile, false);
  std::optional<double> tau0, width;
  compile->add_option("--tau0", tau0, "tau0 in microseconds");
  compile->add_option("--width", width, "pulse width in microseconds");

  auto *mqc = app.add_subcommand("mqc", "MQC tomography of a simulated preparation or a scan CSV");
  mqc_o.add_to(mqc, false);
  std::string scan_csv;
  mqc->add_option("--scan", scan_csv, "scan CSV (phi_deg, theta_deg, gamma_deg, signal)");
  mqc->add_option("--l-max", mqc_o.l_max, "largest l (<= 3)");

  auto *stats = app.add_subcommand("disorder-stats", "field distribution, neighbour correlation, dephasing");
  stats_o.add_to(stats, false);
  std::size_t n_samples = 10000;
  stats->add_option("--samples", n_samples, "number of disorder draws");

  auto *prep = app.add_subcommand("prep-verify", "full preparation sequence against the closed form");
  prep_o.add_to(prep, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*transport) {
      report(run_transport(transport_o.build()));
    } else if (*sweep) {
      report(run_exponent_sweep(sweep_o.build()));
    } else if (*compile) {
      auto cfg = compile_o.build();
      if (tau0) cfg.sequence.tau0_us = *tau0;
      if (width) cfg.sequence.pulse_width_us = *width;
      report(run_compile(cfg));
    } else if (*mqc) {
      const auto cfg = mqc_o.build();
      report(scan_csv.empty() ? run_mqc(cfg) : run_mqc_from_csv(cfg, scan_csv));
    } else if (*stats) {
      report(run_disorder_stats(stats_o.build(), n_samples));
    } else if (*prep) {
      report(run_prep_verify(prep_o.build()));
    }
  } catch (const ConfigError &e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SizeLimitError &e) {
    std::cerr << "size limit: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InfeasibleError &e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError &e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}
