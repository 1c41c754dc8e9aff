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

// Chain Hamiltonians (secular dipolar, tunable XYZ + field) and the
// phosphorus-bath disorder model that supplies the on-site fields w_j.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "spinhydro/errors.hpp"
#include "spinhydro/operators.hpp"
#include "spinhydro/rng.hpp"

namespace spinhydro {

/** coupling_range value meaning "keep every pair". */
inline constexpr std::size_t kAllPairs = std::numeric_limits<std::size_t>::max();

struct ChainModel {
  std::size_t L = 2;
  double J = 30.4;  // krad/s
  std::size_t coupling_range = 1;
  Boundary boundary = Boundary::open;
  double lattice_constant_angstrom = 3.442;

  void validate() const {
    if (L < 2) throw ConfigError("ChainModel: L must be >= 2");
    if (L > 100000) throw ConfigError("ChainModel: L must be <= 100000");
    if (coupling_range < 1) throw ConfigError("ChainModel: coupling_range must be >= 1");
    if (!std::isfinite(J)) throw ConfigError("ChainModel: J must be finite");
    if (!(lattice_constant_angstrom > 0.0))
      throw ConfigError("ChainModel: lattice constant must be positive");
  }

  /** |j-k| in lattice units, minimum image when periodic. */
  std::size_t distance(std::size_t j, std::size_t k) const {
    const std::size_t d = j > k ? j - k : k - j;
    return boundary == Boundary::periodic ? std::min(d, L - d) : d;
  }
};

struct CoupledPair {
  std::uint32_t j = 0;
  std::uint32_t k = 0;
  double r = 1.0;
};

/** All pairs j < k within the coupling range. */
inline std::vector<CoupledPair> coupled_pairs(const ChainModel &m) {
  m.validate();
  std::vector<CoupledPair> out;
  for (std::uint32_t j = 0; j < m.L; ++j)
    for (std::uint32_t k = j + 1; k < m.L; ++k) {
      const std::size_t d = m.distance(j, k);
      if (d == 0 || d > m.coupling_range) continue;
      out.push_back({j, k, static_cast<double>(d)});
    }
  return out;
}

struct HamiltonianParams {
  double u = 0.0;
  double v = 0.0;
  double h = 0.0;

  void validate() const {
    if (!std::isfinite(u) || !std::isfinite(v) || !std::isfinite(h))
      throw ConfigError("HamiltonianParams: u, v, h must be finite");
  }
  bool operator==(const HamiltonianParams &) const = default;
};

/** Adds c_xx SxSx + c_yy SySy + c_zz SzSz on the pair, given in the S basis. */
inline void add_spin_pair_terms(OperatorSum &op, std::uint32_t j, std::uint32_t k, double c_xx,
                                double c_yy, double c_zz) {
  if (c_xx != 0.0) op.add_term(PauliString::pair(j, Pauli::X, k, Pauli::X), 0.25 * c_xx);
  if (c_yy != 0.0) op.add_term(PauliString::pair(j, Pauli::Y, k, Pauli::Y), 0.25 * c_yy);
  if (c_zz != 0.0) op.add_term(PauliString::pair(j, Pauli::Z, k, Pauli::Z), 0.25 * c_zz);
}

/** sum_{j<k} J/(2 r^3) (2 SzSz - SxSx - SySy), in krad/s. */
inline OperatorSum build_dipolar(const ChainModel &m) {
  OperatorSum op(m.L);
  for (const auto &p : coupled_pairs(m)) {
    const double g = m.J / (2.0 * p.r * p.r * p.r);
    add_spin_pair_terms(op, p.j, p.k, -g, -g, 2.0 * g);
  }
  return op;
}

/** sum_j scale * w_j S_z^j. */
inline OperatorSum build_field(std::size_t length, const std::vector<double> &w, double scale = 1.0) {
  if (w.size() != length)
    throw ConfigError("field length " + std::to_string(w.size()) + " does not match L = " +
                      std::to_string(length));
  OperatorSum op(length);
  for (std::uint32_t j = 0; j < length; ++j)
    if (w[j] != 0.0) op.add_term(PauliString::single(j, Pauli::Z), 0.5 * scale * w[j]);
  return op;
}

// ---------------------------------------------------------------------------
// Disorder bath

enum class BathMode { geometric, gaussian, four_gaussian };

inline std::string to_string(BathMode m) {
  switch (m) {
    case BathMode::geometric: return "geometric";
    case BathMode::gaussian: return "gaussian";
    default: return "four_gaussian";
  }
}

inline BathMode parse_bath_mode(const std::string &s) {
  if (s == "geometric") return BathMode::geometric;
  if (s == "gaussian") return BathMode::gaussian;
  if (s == "four_gaussian") return BathMode::four_gaussian;
  throw ConfigError("unknown bath mode '" + s + "'");
}

/**
 * One phosphorus neighbour of a fluorine site. `offset` is the position of the
 * P atom along the chain relative to the F site, in lattice units (multiples
 * of 1/2). Atoms seen from different F sites are identified by
 * (2 * (site + offset), label).
 */
struct BathNeighbor {
  double offset = 0.0;
  double coupling_krad = 0.0;
  int label = -1;  // -1: occurrence index within the same offset
};

struct BathModel {
  double fp_coupling_krad = 6.12;
  std::size_t n_neighbors = 3;
  std::vector<BathNeighbor> geometry;
  BathMode mode = BathMode::gaussian;
  double width_krad = 7.0;            // gaussian mode
  double component_width_krad = 2.3;  // four_gaussian mode
  bool confine_to_chain = false;

  void validate() const {
    if (n_neighbors < 1) throw ConfigError("BathModel: n_neighbors must be >= 1");
    if (mode == BathMode::gaussian && !(width_krad > 0.0))
      throw ConfigError("BathModel: gaussian width must be > 0");
    if (mode == BathMode::four_gaussian && !(component_width_krad >= 0.0))
      throw ConfigError("BathModel: component width must be >= 0");
    if (mode == BathMode::geometric && geometry.empty())
      throw ConfigError("BathModel: geometric mode needs a non-empty geometry");
    for (const auto &g : geometry) {
      const double twice = 2.0 * g.offset;
      if (std::abs(twice - std::round(twice)) > 1e-9)
        throw ConfigError("BathModel: geometry offsets must be multiples of 0.5");
    }
  }
};

/** Three equidistant nearest P in the F plane, each at full strength J^FP. */
inline std::vector<BathNeighbor> default_bath_geometry(double fp_coupling_krad = 6.12) {
  return {{0.0, fp_coupling_krad, 0}, {0.0, fp_coupling_krad, 1}, {0.0, fp_coupling_krad, 2}};
}

using BathKey = std::pair<long, int>;  // (2 * chain position, label)

/** Geometry entries actually used: the n_neighbors strongest couplings. */
inline std::vector<BathNeighbor> active_geometry(const BathModel &bath) {
  std::vector<std::pair<BathNeighbor, int>> g;
  std::map<long, int> seen;
  for (const auto &n : bath.geometry) {
    const long twice = std::lround(2.0 * n.offset);
    const int occurrence = seen[twice]++;
    BathNeighbor e = n;
    if (e.label < 0) e.label = occurrence;
    g.emplace_back(e, static_cast<int>(g.size()));
  }
  std::stable_sort(g.begin(), g.end(), [](const auto &a, const auto &b) {
    return std::abs(a.first.coupling_krad) > std::abs(b.first.coupling_krad);
  });
  if (g.size() > bath.n_neighbors) g.resize(bath.n_neighbors);
  std::vector<BathNeighbor> out;
  for (auto &e : g) out.push_back(e.first);
  return out;
}

/** Couplings J^FP_{j,kappa} of site j to each bath atom kappa. */
inline std::map<BathKey, double> site_couplings(const BathModel &bath, const ChainModel &model,
                                                std::size_t j,
                                                const std::vector<BathNeighbor> &active) {
  std::map<BathKey, double> out;
  for (const auto &n : active) {
    const long twice = 2 * static_cast<long>(j) + std::lround(2.0 * n.offset);
    if (bath.confine_to_chain && (twice < 0 || twice > 2 * static_cast<long>(model.L - 1)))
      continue;
    out[{twice, n.label}] += n.coupling_krad;
  }
  return out;
}

inline std::map<BathKey, double> site_couplings(const BathModel &bath, const ChainModel &model,
                                                std::size_t j) {
  return site_couplings(bath, model, j, active_geometry(bath));
}

struct DisorderRealization {
  std::vector<double> w;                        // krad/s
  std::vector<std::pair<BathKey, int>> bath_spins;  // orientation +1/-1 per atom
  std::uint64_t seed = 0;
};

inline DisorderRealization draw_disorder(const BathModel &bath, const ChainModel &model,
                                         std::uint64_t seed) {
  bath.validate();
  model.validate();
  DisorderRealization dis;
  dis.seed = seed;
  dis.w.assign(model.L, 0.0);
  Rng rng(seed, {0x62617468u});
  switch (bath.mode) {
    case BathMode::gaussian:
      for (auto &w : dis.w) w = bath.width_krad * rng.normal();
      break;
    case BathMode::four_gaussian: {
      const double jf = bath.fp_coupling_krad;
      const std::array<double, 4> centers{-0.5 * jf, 0.5 * jf, -1.5 * jf, 1.5 * jf};
      const std::vector<double> weights{3.0, 3.0, 1.0, 1.0};
      for (auto &w : dis.w) {
        const auto c = rng.categorical(weights);
        w = centers[c] + bath.component_width_krad * rng.normal();
      }
      break;
    }
    case BathMode::geometric: {
      const auto active = active_geometry(bath);
      std::vector<std::map<BathKey, double>> per_site;
      std::set<BathKey> keys;
      for (std::size_t j = 0; j < model.L; ++j) {
        per_site.push_back(site_couplings(bath, model, j, active));
        for (const auto &[k, _] : per_site.back()) keys.insert(k);
      }
      std::map<BathKey, int> spins;
      for (const auto &k : keys) {
        const int s = rng.sign();
        spins[k] = s;
        dis.bath_spins.emplace_back(k, s);
      }
      for (std::size_t j = 0; j < model.L; ++j)
        for (const auto &[k, c] : per_site[j]) dis.w[j] += 0.5 * c * spins[k];
      break;
    }
  }
  return dis;
}

/** Eq.-3 style tunable Hamiltonian in krad/s. */
inline OperatorSum build_tunable(const ChainModel &m, const HamiltonianParams &p,
                                 const DisorderRealization &dis) {
  p.validate();
  if (dis.w.size() != m.L)
    throw ConfigError("disorder realization has " + std::to_string(dis.w.size()) +
                      " sites, model has L = " + std::to_string(m.L));
  OperatorSum op(m.L);
  for (const auto &pr : coupled_pairs(m)) {
    const double g = m.J / (pr.r * pr.r * pr.r);
    add_spin_pair_terms(op, pr.j, pr.k, p.u * g, (-p.u - p.v) * g, p.v * g);
  }
  if (p.h != 0.0) op += build_field(m.L, dis.w, p.h);
  return op;
}

inline OperatorSum build_tunable(const ChainModel &m, const HamiltonianParams &p) {
  DisorderRealization none;
  none.w.assign(m.L, 0.0);
  return build_tunable(m, p, none);
}

/** Local energy density e_j = field_j + (1/2) sum_k H_jk; sums to H. */
inline OperatorSum local_energy(const OperatorSum &h, std::uint32_t site) {
  OperatorSum out(h.length());
  for (const auto &[s, c] : h.terms()) {
    if (s.is_identity()) continue;
    bool touches = false;
    for (const auto &f : s.factors()) touches |= (f.site == site);
    if (touches) out.add_term(s, c / static_cast<double>(s.weight()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bath statistics

struct BathStatistics {
  std::vector<double> bin_edges;
  std::vector<std::size_t> counts;
  double mean = 0.0;
  double variance = 0.0;
  double neighbor_correlation = 0.0;
  double neighbor_correlation_stderr = 0.0;
  std::vector<double> tau_ms;
  std::vector<double> dephasing;
  std::size_t n_samples = 0;
};

inline BathStatistics bath_statistics(const BathModel &bath, const ChainModel &model,
                                      std::size_t n_samples, std::uint64_t seed = 1,
                                      std::size_t n_bins = 41, double tau_max_ms = 1.0,
                                      std::size_t n_tau = 51) {
  if (n_samples < 1) throw ConfigError("bath_statistics: n_samples must be >= 1");
  std::vector<double> all;
  all.reserve(n_samples * model.L);
  double sum_nn = 0.0;
  double sum_sq = 0.0;
  std::vector<double> nn_per_sample;
  const std::size_t n_pairs = model.L - 1;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const auto dis = draw_disorder(bath, model, seed + s);
    double nn = 0.0;
    for (std::size_t j = 0; j + 1 < model.L; ++j) nn += dis.w[j] * dis.w[j + 1];
    sum_nn += nn;
    nn_per_sample.push_back(nn / static_cast<double>(n_pairs));
    for (double w : dis.w) {
      all.push_back(w);
      sum_sq += w * w;
    }
  }
  BathStatistics st;
  st.n_samples = n_samples;
  const double n = static_cast<double>(all.size());
  for (double w : all) st.mean += w;
  st.mean /= n;
  for (double w : all) st.variance += (w - st.mean) * (w - st.mean);
  st.variance /= std::max(1.0, n - 1.0);
  const double msq = sum_sq / n;
  st.neighbor_correlation = (sum_nn / static_cast<double>(n_samples * n_pairs)) / msq;
  if (n_samples > 1) {
    double m = 0.0;
    for (double x : nn_per_sample) m += x;
    m /= static_cast<double>(n_samples);
    double v = 0.0;
    for (double x : nn_per_sample) v += (x - m) * (x - m);
    v /= static_cast<double>(n_samples - 1);
    st.neighbor_correlation_stderr = std::sqrt(v / static_cast<double>(n_samples)) / msq;
  }
  const double sd = std::sqrt(st.variance);
  const double lo = st.mean - 4.0 * std::max(sd, 1e-12);
  const double hi = st.mean + 4.0 * std::max(sd, 1e-12);
  st.counts.assign(n_bins, 0);
  for (std::size_t b = 0; b <= n_bins; ++b)
    st.bin_edges.push_back(lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(n_bins));
  for (double w : all) {
    if (w < lo || w >= hi) continue;
    const auto b = static_cast<std::size_t>((w - lo) / (hi - lo) * static_cast<double>(n_bins));
    ++st.counts[std::min(b, n_bins - 1)];
  }
  for (std::size_t k = 0; k < n_tau; ++k) {
    const double tau = tau_max_ms * static_cast<double>(k) / static_cast<double>(n_tau - 1);
    double c = 0.0;
    for (double w : all) c += std::cos(w * tau);
    st.tau_ms.push_back(tau);
    st.dephasing.push_back(c / n);
  }
  return st;
}

// ---------------------------------------------------------------------------
// Bath geometry I/O and the fluorapatite preset

/** CSV rows: f_site_offset, coupling_krad[, p_label]; '#' comments, optional header. */
inline std::vector<BathNeighbor> parse_bath_geometry(std::istream &in) {
  std::vector<BathNeighbor> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (cols.size() < 2 || cols.size() > 3)
      throw ConfigError("bath geometry line " + std::to_string(lineno) +
                        ": expected 2 or 3 columns");
    BathNeighbor n;
    try {
      std::size_t used = 0;
      n.offset = std::stod(cols[0], &used);
      n.coupling_krad = std::stod(cols[1]);
      if (cols.size() == 3) n.label = std::stoi(cols[2]);
    } catch (const std::exception &) {
      if (out.empty() && lineno == 1) continue;  // header row
      throw ConfigError("bath geometry line " + std::to_string(lineno) + ": not numeric");
    }
    out.push_back(n);
  }
  if (out.empty()) throw ConfigError("bath geometry: no rows");
  return out;
}

inline std::vector<BathNeighbor> load_bath_geometry(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open bath geometry file '" + path + "'");
  return parse_bath_geometry(in);
}

inline std::string format_bath_geometry(const std::vector<BathNeighbor> &g) {
  std::ostringstream os;
  os.precision(17);
  os << "f_site_offset,coupling_krad,p_label\n";
  for (const auto &n : g) os << n.offset << ',' << n.coupling_krad << ',' << n.label << '\n';
  return os.str();
}

/**
 * P neighbours of an F site in fluorapatite, Ca5(PO4)3F, hexagonal P6_3/m with
 * a = 9.375 A, c = 6.884 A and P on 6h (0.3981, 0.3688, 1/4). F sits on the
 * 6_3 axis at z = 1/4, 3/4 so the chain spacing is c/2. Couplings are
 * fp_coupling * (r_min/r)^3 * (1 - 3 cos^2 theta) with theta measured from c.
 * Atoms are labelled by mapping them into the reference plane with the screw.
 */
inline std::vector<BathNeighbor> fluorapatite_geometry(std::size_t n_nearest = 45,
                                                       double fp_coupling_krad = 6.12) {
  constexpr double a = 9.375;
  constexpr double c = 6.884;
  constexpr double x = 0.3981;
  constexpr double y = 0.3688;
  const std::array<std::array<double, 3>, 6> frac{{{x, y, 0.25},
                                                   {-y, x - y, 0.25},
                                                   {-x + y, -x, 0.25},
                                                   {-x, -y, 0.75},
                                                   {y, -x + y, 0.75},
                                                   {x - y, x, 0.75}}};
  const double s3 = std::sqrt(3.0);
  struct Atom {
    double x, y, z, r;
  };
  std::vector<Atom> atoms;
  const int span = 4;
  for (const auto &f : frac)
    for (int i = -span; i <= span; ++i)
      for (int j = -span; j <= span; ++j)
        for (int k = -span; k <= span; ++k) {
          const double fx = f[0] + i;
          const double fy = f[1] + j;
          const double fz = f[2] + k - 0.25;  // relative to the F at z = 1/4
          Atom at{a * fx - 0.5 * a * fy, 0.5 * s3 * a * fy, c * fz, 0.0};
          at.r = std::sqrt(at.x * at.x + at.y * at.y + at.z * at.z);
          atoms.push_back(at);
        }
  std::stable_sort(atoms.begin(), atoms.end(), [](const Atom &p, const Atom &q) { return p.r < q.r; });
  if (n_nearest > atoms.size()) throw ConfigError("fluorapatite_geometry: too many neighbours");
  atoms.resize(n_nearest);
  const double r_min = atoms.front().r;
  // plane-0 images under the inverse screw (rotate -60 deg per half cell, drop c/2)
  std::vector<std::array<double, 2>> plane0;
  std::vector<BathNeighbor> out;
  for (const auto &at : atoms) {
    const double o = at.z / (0.5 * c);
    const long oi = std::lround(o);
    if (std::abs(o - static_cast<double>(oi)) > 1e-9)
      throw NumericalError("fluorapatite_geometry: P atom off the F planes");
    const double ang = -std::numbers::pi / 3.0 * static_cast<double>(oi);
    const double bx = std::cos(ang) * at.x - std::sin(ang) * at.y;
    const double by = std::sin(ang) * at.x + std::cos(ang) * at.y;
    int label = -1;
    for (std::size_t q = 0; q < plane0.size(); ++q)
      if (std::abs(plane0[q][0] - bx) < 1e-6 && std::abs(plane0[q][1] - by) < 1e-6)
        label = static_cast<int>(q);
    if (label < 0) {
      label = static_cast<int>(plane0.size());
      plane0.push_back({bx, by});
    }
    const double cos_t = at.z / at.r;
    const double coupling =
        fp_coupling_krad * std::pow(r_min / at.r, 3) * (1.0 - 3.0 * cos_t * cos_t);
    out.push_back({static_cast<double>(oi), coupling, label});
  }
  return out;
}

}  // namespace spinhydro
