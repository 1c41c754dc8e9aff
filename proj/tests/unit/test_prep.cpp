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

#include "oracle.hpp"
#include "spinhydro/prep.hpp"

using namespace spinhydro;
using Catch::Matchers::WithinAbs;

namespace {

DisorderRealization sample_field(std::size_t L, std::uint64_t seed) {
  ChainModel m;
  m.L = L;
  BathModel b;
  b.mode = BathMode::four_gaussian;
  return draw_disorder(b, m, seed);
}

}  // namespace

TEST_CASE("closed-form random Zeeman observable", "[prep]") {
  const auto dis = sample_field(5, 3);
  const double tau = 0.48;
  const auto r = closed_form_rz(dis, tau);
  REQUIRE(r.coeffs.size() == 5);
  for (std::uint32_t j = 0; j < 5; ++j) {
    CHECK(r.coeffs[j] == std::sin(dis.w[j] * tau / 3.0));
    CHECK(r.op.coefficient(PauliString::single(j, Pauli::Z)).real() == 0.5 * r.coeffs[j]);
  }
  const auto rx = closed_form_rz(dis, tau, Pauli::X);
  CHECK(rx.op.coefficient(PauliString::single(2, Pauli::X)).real() == 0.5 * r.coeffs[2]);
  CHECK_THROWS_AS(closed_form_rz(dis, 0.0), ConfigError);
}

TEST_CASE("closed-form random DQ observable", "[prep]") {
  const auto dis = sample_field(5, 4);
  const double tau = 0.3;
  const auto r = closed_form_rdq(dis, tau, ObservableKind::rDQ_y);
  REQUIRE(r.coeffs.size() == 4);
  for (std::uint32_t j = 0; j + 1 < 5; ++j) {
    const double a = std::sin((dis.w[j] + dis.w[j + 1]) * tau / 3.0);
    CHECK_THAT(r.coeffs[j], WithinAbs(a, 1e-15));
    // (3/4) a (SzSz - SxSx), each S S = sigma sigma / 4
    CHECK_THAT(r.op.coefficient(PauliString::pair(j, Pauli::Z, j + 1, Pauli::Z)).real(), WithinAbs(0.1875 * a, 1e-15));
    CHECK_THAT(r.op.coefficient(PauliString::pair(j, Pauli::X, j + 1, Pauli::X)).real(), WithinAbs(-0.1875 * a, 1e-15));
  }
  const auto rz = closed_form_rdq(dis, tau, ObservableKind::rDQ_z);
  CHECK_THAT(rz.op.coefficient(PauliString::pair(1, Pauli::Y, 2, Pauli::Y)).real(), WithinAbs(-0.1875 * rz.coeffs[1], 1e-15));
  const auto periodic = closed_form_rdq(dis, tau, ObservableKind::rDQ_y, Boundary::periodic);
  CHECK(periodic.coeffs.size() == 5);
  CHECK_THROWS_AS(closed_form_rdq(dis, tau, ObservableKind::rZ_z), ConfigError);
}

TEST_CASE("coupling-free preparation reproduces the closed form", "[prep]") {
  ChainModel m;
  m.L = 6;
  const auto dis = sample_field(m.L, 11);
  PrepOptions opt;
  opt.encoding = EncodingMode::ideal_average;
  opt.include_couplings = false;
  for (std::size_t n : {1u, 4u, 9u}) {
    const auto res = simulate_prep_sequence(ObservableKind::rZ_z, m, dis, n, opt);
    const auto cf = closed_form_rz(dis, res.observable.tau_ms);
    CHECK_THAT(res.observable.tau_ms, WithinAbs(n * kWahuhaCycleMs, 1e-15));
    for (std::size_t j = 0; j < m.L; ++j) CHECK_THAT(res.observable.coeffs[j], WithinAbs(cf.coeffs[j], 1e-10));
    // phase cycling leaves nothing but the z fields
    CHECK(std::sqrt((res.observable.op - cf.op).norm2()) < 1e-12);
  }
  for (auto kind : {ObservableKind::rZ_x, ObservableKind::rZ_y}) {
    const auto res = simulate_prep_sequence(kind, m, dis, 3, opt);
    const auto cf = closed_form_rz(dis, res.observable.tau_ms, kind == ObservableKind::rZ_x ? Pauli::X : Pauli::Y);
    CHECK(std::sqrt((res.observable.op - cf.op).norm2()) < 1e-12);
  }
}

TEST_CASE("pi control suppresses the encoded signal", "[prep]") {
  ChainModel m;
  m.L = 6;
  const auto dis = sample_field(m.L, 12);
  for (auto enc : {EncodingMode::ideal_average, EncodingMode::wahuha8}) {
    PrepOptions opt;
    opt.encoding = enc;
    const double plain = simulate_prep_sequence(ObservableKind::rZ_z, m, dis, 8, opt).observable.op.norm2();
    opt.with_pi_control = true;
    const double ctrl = simulate_prep_sequence(ObservableKind::rZ_z, m, dis, 8, opt).observable.op.norm2();
    CHECK(std::sqrt(ctrl / plain) <= 0.1);
  }
}

TEST_CASE("literal WAHUHA encoding with couplings stays close to the closed form", "[prep]") {
  ChainModel m;
  m.L = 6;
  const auto dis = sample_field(m.L, 5);
  const auto res = simulate_prep_sequence(ObservableKind::rZ_z, m, dis, 8, {});
  CHECK(res.closed_form_overlap > 0.99);
}

TEST_CASE("random DQ preparation overlaps its closed form", "[prep]") {
  ChainModel m;
  m.L = 6;
  const auto dis = sample_field(m.L, 5);
  const auto res = simulate_prep_sequence(ObservableKind::rDQ_y, m, dis, 8, {});
  CHECK(res.jb_time_ms > 0.0);
  CHECK(res.closed_form_overlap > 0.95);
}

TEST_CASE("thermalization projection onto the Hamiltonian", "[prep]") {
  ChainModel m;
  m.L = 4;
  const auto h = build_dipolar(m);
  CHECK(std::sqrt((thermalization_projection(h * 2.5, h) - h * 2.5).norm2()) < 1e-14);
  CHECK(thermalization_projection(collective_spin(4, Pauli::Z), h).pruned(1e-14).empty());
  CHECK_THROWS_AS(thermalization_projection(h, OperatorSum(4)), ConfigError);
}

TEST_CASE("spatial correlation formula against exact bath enumeration", "[prep]") {
  ChainModel m;
  m.L = 4;
  BathModel b;
  b.mode = BathMode::geometric;
  b.geometry = {{0.0, 6.12, 0}, {0.5, 2.1, 0}, {-0.5, 2.1, 1}, {1.0, -1.3, 0}};
  b.n_neighbors = 4;
  for (double tau : {0.1, 0.5, 2.0})
    for (auto [j, k] : {std::pair<std::size_t, std::size_t>{0, 0}, {0, 1}, {1, 2}, {0, 2}, {1, 3}}) {
      const auto cj = site_couplings(b, m, j);
      const auto ck = site_couplings(b, m, k);
      std::map<BathKey, std::pair<double, double>> atoms;
      for (const auto &[key, c] : cj) atoms[key].first = c;
      for (const auto &[key, c] : ck) atoms[key].second = c;
      std::vector<std::pair<double, double>> list;
      for (const auto &[_, c] : atoms) list.push_back(c);
      double sum = 0.0;
      const std::size_t n = list.size();
      for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        double wj = 0.0, wk = 0.0;
        for (std::size_t a = 0; a < n; ++a) {
          const double s = (mask >> a) & 1 ? 0.5 : -0.5;
          wj += list[a].first * s;
          wk += list[a].second * s;
        }
        sum += std::sin(wj * tau / 3.0) * std::sin(wk * tau / 3.0);
      }
      const double exact = sum / static_cast<double>(std::size_t{1} << n);
      CHECK_THAT(spatial_correlation_analytic(b, m, tau, j, k), WithinAbs(exact, 1e-14));
    }
  BathModel g;
  CHECK_THROWS_AS(spatial_correlation_analytic(g, m, 1.0, 0, 1), ConfigError);
}

TEST_CASE("preparation input validation", "[prep]") {
  ChainModel m;
  m.L = 4;
  const auto dis = sample_field(4, 1);
  CHECK_THROWS_AS(simulate_prep_sequence(ObservableKind::rZ_z, m, dis, 0), ConfigError);
  m.L = 14;
  CHECK_THROWS_AS(simulate_prep_sequence(ObservableKind::rZ_z, m, sample_field(14, 1), 1), SizeLimitError);
  CHECK_THROWS_AS(parse_observable_kind("rQ"), ConfigError);
  CHECK_THROWS_AS(parse_encoding_mode("none"), ConfigError);
}
