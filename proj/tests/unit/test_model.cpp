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

#include <catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "oracle.hpp"
#include "spinhydro/model.hpp"

using namespace spinhydro;
using Catch::Matchers::WithinAbs;

namespace {

/** Dense S_a^j S_b^k built from Kronecker products. */
oracle::Mat spin_spin(std::size_t L, std::uint32_t j, Pauli a, std::uint32_t k, Pauli b) {
  return 0.25 * oracle::kron_string(PauliString::pair(j, a, k, b), L);
}

/** Dense reference of the tunable Hamiltonian, written from its definition. */
oracle::Mat tunable_reference(const ChainModel &m, const HamiltonianParams &p, const std::vector<double> &w) {
  const std::size_t L = m.L;
  const Eigen::Index dim = Eigen::Index{1} << L;
  oracle::Mat h = oracle::Mat::Zero(dim, dim);
  for (std::uint32_t j = 0; j < L; ++j)
    for (std::uint32_t k = j + 1; k < L; ++k) {
      std::size_t d = k - j;
      if (m.boundary == Boundary::periodic) d = std::min(d, L - d);
      if (d > m.coupling_range) continue;
      const double g = m.J / std::pow(static_cast<double>(d), 3);
      const auto xx = spin_spin(L, j, Pauli::X, k, Pauli::X);
      const auto yy = spin_spin(L, j, Pauli::Y, k, Pauli::Y);
      const auto zz = spin_spin(L, j, Pauli::Z, k, Pauli::Z);
      h += p.u * g * (xx - yy) + p.v * g * (zz - yy);
    }
  for (std::uint32_t j = 0; j < L; ++j)
    h += p.h * w[j] * 0.5 * oracle::kron_string(PauliString::single(j, Pauli::Z), L);
  return h;
}

double zz_coefficient(const OperatorSum &h, std::uint32_t j, std::uint32_t k) {
  return h.coefficient(PauliString::pair(j, Pauli::Z, k, Pauli::Z)).real();
}

}  // namespace

TEST_CASE("dipolar Hamiltonian on a single pair", "[model]") {
  ChainModel m;
  m.L = 2;
  m.J = 1.0;
  const auto h = build_dipolar(m);
  const oracle::Mat want = 0.5 * (2.0 * spin_spin(2, 0, Pauli::Z, 1, Pauli::Z) - spin_spin(2, 0, Pauli::X, 1, Pauli::X) -
                                   spin_spin(2, 0, Pauli::Y, 1, Pauli::Y));
  CHECK(oracle::max_abs(oracle::dense(h) - want) < 1e-15);
}

TEST_CASE("next-nearest couplings are eight times weaker", "[model]") {
  ChainModel m;
  m.L = 3;
  m.coupling_range = kAllPairs;
  const auto h = build_dipolar(m);
  CHECK_THAT(zz_coefficient(h, 0, 1) / zz_coefficient(h, 0, 2), WithinAbs(8.0, 1e-12));
  // J/(2 r^3) * 2 SzSz = (J/8) sigma_z sigma_z / 4 ... per Pauli pair: J/(2*8)*2*(1/4)
  CHECK_THAT(zz_coefficient(h, 0, 2), WithinAbs(m.J / 16.0 * 2.0 * 0.25, 1e-12));
  m.coupling_range = 1;
  CHECK(zz_coefficient(build_dipolar(m), 0, 2) == 0.0);
}

TEST_CASE("periodic chains use the minimum image distance", "[model]") {
  ChainModel m;
  m.L = 4;
  m.J = 1.0;
  m.boundary = Boundary::periodic;
  m.coupling_range = 2;
  for (std::size_t j = 0; j < 4; ++j)
    for (std::size_t k = 0; k < 4; ++k) {
      const std::size_t raw = j > k ? j - k : k - j;
      CHECK(m.distance(j, k) == std::min(raw, 4 - raw));
    }
  const auto h = build_dipolar(m);
  CHECK_THAT(zz_coefficient(h, 0, 3), WithinAbs(zz_coefficient(h, 0, 1), 1e-15));
  CHECK_THAT(zz_coefficient(h, 0, 2), WithinAbs(zz_coefficient(h, 0, 1) / 8.0, 1e-15));
  CHECK(coupled_pairs(m).size() == 6);
}

TEST_CASE("dipolar Hamiltonian symmetries", "[model]") {
  ChainModel m;
  m.L = 7;
  m.coupling_range = kAllPairs;
  const auto h = build_dipolar(m);
  CHECK(h.is_hermitian());
  CHECK(h.normalized_trace() == Complex{});
  CHECK(commutator(h, collective_spin(m.L, Pauli::Z)).pruned(1e-12).empty());
  // 1/r^3 decay along the chain
  for (std::uint32_t d = 1; d < 7; ++d)
    CHECK_THAT(zz_coefficient(h, 0, d) * d * d * d, WithinAbs(zz_coefficient(h, 0, 1), 1e-12));
}

TEST_CASE("tunable Hamiltonian matches its dense definition", "[model]") {
  ChainModel m;
  m.L = 5;
  m.coupling_range = kAllPairs;
  const std::vector<double> w{1.0, -2.0, 0.5, 3.0, -0.25};
  DisorderRealization dis;
  dis.w = w;
  for (const HamiltonianParams p : {HamiltonianParams{0.5, 0, 0}, HamiltonianParams{-0.15, 0.3, 0},
                                    HamiltonianParams{-0.15, 0.3, 0.7}, HamiltonianParams{0.2, -0.4, 1.0}}) {
    const auto h = build_tunable(m, p, dis);
    CHECK(oracle::max_abs(oracle::dense(h) - tunable_reference(m, p, w)) < 1e-12);
  }
  m.boundary = Boundary::periodic;
  const HamiltonianParams p{-0.15, 0.3, 0.7};
  CHECK(oracle::max_abs(oracle::dense(build_tunable(m, p, dis)) - tunable_reference(m, p, w)) < 1e-12);
  CHECK(build_tunable(m, HamiltonianParams{0, 0, 0}, dis).empty());
  dis.w.pop_back();
  CHECK_THROWS_AS(build_tunable(m, p, dis), ConfigError);
}

TEST_CASE("tunable Hamiltonian symmetries", "[model]") {
  ChainModel m;
  m.L = 6;
  m.coupling_range = kAllPairs;
  const auto dq = build_tunable(m, {0.5, 0, 0});
  CHECK_FALSE(commutator(dq, collective_spin(m.L, Pauli::Z)).pruned(1e-12).empty());
  // odd-distance XX - YY terms conserve the staggered magnetization, even-distance ones do not
  CHECK_FALSE(commutator(dq, staggered_spin_z(m.L)).pruned(1e-12).empty());
  ChainModel nn = m;
  nn.coupling_range = 1;
  CHECK(commutator(build_tunable(nn, {0.5, 0, 0}), staggered_spin_z(m.L)).pruned(1e-12).empty());
  const auto xxz = build_tunable(m, {-0.15, 0.3, 0});
  CHECK(commutator(xxz, collective_spin(m.L, Pauli::Z)).pruned(1e-12).empty());
  // each pair coupling sums to zero (traceless interaction in the S_a S_a basis)
  for (const auto &pr : coupled_pairs(m)) {
    double s = 0.0;
    for (Pauli a : {Pauli::X, Pauli::Y, Pauli::Z})
      s += xxz.coefficient(PauliString::pair(pr.j, a, pr.k, a)).real();
    CHECK_THAT(s, WithinAbs(0.0, 1e-14));
  }
  // reflection j -> L-1-j leaves h = 0 Hamiltonians invariant on open chains
  OperatorSum reflected(m.L);
  for (const auto &[s, c] : xxz.terms()) {
    std::vector<SitePauli> f;
    for (const auto &x : s.factors()) f.push_back({static_cast<std::uint32_t>(m.L - 1 - x.site), x.axis});
    std::sort(f.begin(), f.end());
    reflected.add_term(PauliString(std::move(f)), c);
  }
  CHECK(oracle::max_abs(oracle::dense(reflected - xxz)) < 1e-13);
}

TEST_CASE("local energy densities sum to the Hamiltonian", "[model]") {
  ChainModel m;
  m.L = 6;
  m.coupling_range = kAllPairs;
  DisorderRealization dis;
  dis.w = {0.3, -1.0, 2.0, 0.1, -0.4, 1.5};
  const auto h = build_tunable(m, {-0.15, 0.3, 0.5}, dis);
  OperatorSum sum(m.L);
  for (std::uint32_t j = 0; j < m.L; ++j) sum += local_energy(h, j);
  CHECK(oracle::max_abs(oracle::dense(sum - h)) < 1e-13);
}

TEST_CASE("disorder draws are deterministic in the seed", "[model]") {
  ChainModel m;
  m.L = 16;
  for (BathMode mode : {BathMode::gaussian, BathMode::four_gaussian, BathMode::geometric}) {
    BathModel b;
    b.mode = mode;
    b.geometry = fluorapatite_geometry(45);
    b.n_neighbors = 45;
    const auto a = draw_disorder(b, m, 42);
    const auto c = draw_disorder(b, m, 42);
    const auto d = draw_disorder(b, m, 43);
    CHECK(a.w == c.w);
    CHECK(a.w != d.w);
    CHECK(a.w.size() == m.L);
  }
}

TEST_CASE("gaussian bath variance", "[model]") {
  ChainModel m;
  m.L = 100;
  BathModel b;
  b.mode = BathMode::gaussian;
  b.width_krad = 7.0;
  const auto st = bath_statistics(b, m, 1000);  // 1e5 draws
  const double n = 1e5;
  const double sigma_var = 49.0 * std::sqrt(2.0 / (n - 1));
  CHECK(std::abs(st.variance - 49.0) < 3.0 * sigma_var);
  CHECK(std::abs(st.neighbor_correlation) < 4.0 * st.neighbor_correlation_stderr + 1e-3);
  CHECK_THAT(st.dephasing.front(), WithinAbs(1.0, 1e-15));
  // dephasing of a gaussian field: exp(-sigma^2 tau^2 / 2)
  for (std::size_t k = 0; k < st.tau_ms.size(); k += 10)
    CHECK_THAT(st.dephasing[k], WithinAbs(std::exp(-24.5 * st.tau_ms[k] * st.tau_ms[k]), 0.01));
}

TEST_CASE("four-gaussian bath centers and weights", "[model]") {
  ChainModel m;
  m.L = 100;
  BathModel b;
  b.mode = BathMode::four_gaussian;
  b.component_width_krad = 0.0;
  const double jf = b.fp_coupling_krad;
  std::map<long, std::size_t> counts;
  std::size_t n = 0;
  for (std::uint64_t s = 0; s < 400; ++s)
    for (double w : draw_disorder(b, m, s).w) {
      ++counts[std::lround(2.0 * w / jf)];
      ++n;
    }
  CHECK(counts.size() == 4);
  const std::map<long, double> p{{-3, 1.0 / 8}, {-1, 3.0 / 8}, {1, 3.0 / 8}, {3, 1.0 / 8}};
  for (const auto &[key, prob] : p) {
    const double expect = prob * static_cast<double>(n);
    CHECK(std::abs(static_cast<double>(counts[key]) - expect) < 5.0 * std::sqrt(expect));
  }
}

TEST_CASE("geometric bath with one shared P atom", "[model]") {
  ChainModel m;
  m.L = 2;
  BathModel b;
  b.mode = BathMode::geometric;
  b.geometry = {{0.5, 4.0, 0}, {-0.5, 4.0, 0}};
  b.n_neighbors = 2;
  b.confine_to_chain = true;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto dis = draw_disorder(b, m, s);
    CHECK(dis.w[0] == dis.w[1]);
    CHECK(std::abs(dis.w[0]) == 2.0);
  }
  b.geometry.clear();
  CHECK_THROWS_AS(draw_disorder(b, m, 1), ConfigError);
}

TEST_CASE("geometric field is half the signed coupling sum", "[model]") {
  ChainModel m;
  m.L = 5;
  BathModel b;
  b.mode = BathMode::geometric;
  b.geometry = default_bath_geometry();
  const auto dis = draw_disorder(b, m, 9);
  std::map<BathKey, int> spins(dis.bath_spins.begin(), dis.bath_spins.end());
  for (std::size_t j = 0; j < m.L; ++j) {
    double w = 0.0;
    for (int label = 0; label < 3; ++label) w += 0.5 * 6.12 * spins.at({2 * static_cast<long>(j), label});
    CHECK_THAT(dis.w[j], WithinAbs(w, 1e-14));
  }
  // three equal couplings: the field takes the values +-J/2 and +-3J/2 (four-gaussian structure)
  std::set<long> seen;
  for (std::uint64_t s = 0; s < 200; ++s)
    for (double w : draw_disorder(b, m, s).w) seen.insert(std::lround(2.0 * w / 6.12));
  CHECK(seen == std::set<long>{-3, -1, 1, 3});
}

TEST_CASE("fluorapatite bath neighbour correlation", "[model]") {
  ChainModel m;
  m.L = 20;
  BathModel b;
  b.mode = BathMode::geometric;
  b.geometry = fluorapatite_geometry(45);
  b.n_neighbors = 45;
  const auto st = bath_statistics(b, m, 5000);
  CHECK(st.neighbor_correlation < -0.15);
  CHECK(st.neighbor_correlation > -0.25);
  // nearest P: three atoms in the F plane at full strength
  const auto g = fluorapatite_geometry(3);
  for (const auto &n : g) {
    CHECK(n.offset == 0.0);
    CHECK_THAT(n.coupling_krad, WithinAbs(6.12, 1e-12));
  }
}

TEST_CASE("bath geometry CSV round trip and errors", "[model]") {
  const auto g = fluorapatite_geometry(12);
  std::istringstream in(format_bath_geometry(g));
  const auto back = parse_bath_geometry(in);
  REQUIRE(back.size() == g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    CHECK(back[k].offset == g[k].offset);
    CHECK(back[k].coupling_krad == g[k].coupling_krad);
    CHECK(back[k].label == g[k].label);
  }
  std::istringstream bad("0,1\n1,x\n");
  CHECK_THROWS_AS(parse_bath_geometry(bad), ConfigError);
  std::istringstream empty("# nothing\n");
  CHECK_THROWS_AS(parse_bath_geometry(empty), ConfigError);
  BathModel b;
  b.mode = BathMode::geometric;
  b.geometry = {{0.3, 1.0, -1}};
  CHECK_THROWS_AS(b.validate(), ConfigError);
}

TEST_CASE("model validation", "[model]") {
  ChainModel m;
  m.L = 1;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m.L = 4;
  m.coupling_range = 0;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  BathModel b;
  b.width_krad = 0.0;
  CHECK_THROWS_AS(b.validate(), ConfigError);
  CHECK_THROWS_AS(parse_bath_mode("uniform"), ConfigError);
  CHECK_THROWS_AS((HamiltonianParams{std::nan(""), 0, 0}.validate()), ConfigError);
}
