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
#include <random>

#include "oracle.hpp"
#include "spinhydro/engine.hpp"
#include "spinhydro/model.hpp"

using namespace spinhydro;
using Catch::Matchers::WithinAbs;

namespace {

/** Tr[A(t) B]/2^L with A(t) = e^{iHt} A e^{-iHt}, via explicit matrix exponentials. */
std::vector<double> oracle_correlation(const OperatorSum &h, const OperatorSum &a, const OperatorSum &b,
                                       const std::vector<double> &ts) {
  const oracle::Mat hd = oracle::dense(h), ad = oracle::dense(a), bd = oracle::dense(b);
  std::vector<double> out;
  for (double t : ts) {
    const oracle::Mat u = oracle::expm_herm(hd, t);
    const oracle::Mat at = u.adjoint() * ad * u;
    out.push_back((at * bd).trace().real() / static_cast<double>(hd.rows()));
  }
  return out;
}

std::vector<double> grid(double t_max, std::size_t n) {
  std::vector<double> g;
  for (std::size_t k = 0; k < n; ++k) g.push_back(t_max * static_cast<double>(k) / static_cast<double>(n - 1));
  return g;
}

OperatorSum chain_h(std::size_t L, HamiltonianParams p, std::size_t range = 1, std::uint64_t seed = 0) {
  ChainModel m;
  m.L = L;
  m.coupling_range = range;
  BathModel b;
  const auto dis = draw_disorder(b, m, seed);
  return build_tunable(m, p, dis) * (1.0 / m.J);
}

EvolutionJob make_job(const OperatorSum &h, const OperatorSum &a, EngineMethod method,
                      const std::vector<double> &ts) {
  EvolutionJob job;
  job.H = h;
  job.A = a;
  job.B = a;
  job.t_grid = ts;
  job.method = method;
  return job;
}

}  // namespace

TEST_CASE("dense correlation matches explicit matrix exponentials", "[engine]") {
  std::mt19937_64 rng(31);
  const auto h = oracle::random_operator(5, 20, rng, true);
  const auto a = oracle::random_operator(5, 4, rng, true);
  const auto b = oracle::random_operator(5, 4, rng, true);
  const auto ts = grid(3.0, 13);
  const auto c = dense_correlation(h, a, b, ts);
  const auto want = oracle_correlation(h, a, b, ts);
  for (std::size_t k = 0; k < ts.size(); ++k) CHECK_THAT(c.values[k], WithinAbs(want[k], 1e-12));
}

TEST_CASE("sparse Hamiltonian action matches the dense matrix", "[engine]") {
  std::mt19937_64 rng(37);
  const auto h = oracle::random_operator(6, 25, rng, true);
  const SpinOperator op(h);
  StateVector psi(op.dim());
  std::normal_distribution<double> g;
  for (auto &x : psi) x = Complex(g(rng), g(rng));
  StateVector out;
  op.apply(psi, out);
  const Eigen::VectorXcd ref = oracle::dense(h) * Eigen::Map<const Eigen::VectorXcd>(psi.data(), psi.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) worst = std::max(worst, std::abs(out[i] - ref(i)));
  CHECK(worst < 1e-12);
}

TEST_CASE("t = 0 value of a single-site autocorrelation is one quarter", "[engine]") {
  const auto h = chain_h(8, {-0.15, 0.3, 0.23}, kAllPairs, 5);
  const auto a = spin(8, 3, Pauli::Z);
  for (auto method : {EngineMethod::dense, EngineMethod::krylov, EngineMethod::typicality}) {
    auto job = make_job(h, a, method, {0.0, 0.5});
    job.n_vectors = 8;
    const auto c = evolve_correlation(job);
    CHECK_THAT(c.values[0], WithinAbs(0.25, method == EngineMethod::typicality ? 0.02 : 1e-13));
  }
}

TEST_CASE("Krylov exact trace agrees with dense", "[engine]") {
  const auto h = chain_h(8, {-0.15, 0.3, 0.23}, kAllPairs, 7);
  const auto a = spin(8, 4, Pauli::Z);
  const auto ts = grid(10.0, 21);
  auto job = make_job(h, a, EngineMethod::krylov, ts);
  job.tolerance = 1e-10;
  const auto k = evolve_correlation(job);
  const auto d = dense_correlation(h, a, a, ts);
  for (std::size_t i = 0; i < ts.size(); ++i) CHECK_THAT(k.values[i], WithinAbs(d.values[i], 1e-8));
}

TEST_CASE("typicality agrees with dense within its error bars", "[engine]") {
  const std::size_t L = 10;
  const auto h = chain_h(L, {-0.15, 0.3, 0.0});
  const auto a = spin(L, 5, Pauli::Z);
  const auto ts = grid(10.0, 11);
  auto job = make_job(h, a, EngineMethod::typicality, ts);
  job.n_vectors = 16;
  const auto typ = evolve_correlation(job);
  const auto d = dense_correlation(h, a, a, ts);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (i > 0) CHECK(typ.stderrs[i] > 0.0);  // (S_z)^2 = 1/4 exactly, so t = 0 has no spread
    CHECK(std::abs(typ.values[i] - d.values[i]) < 4.0 * typ.stderrs[i] + 1e-6);
  }
  // more vectors, smaller errors
  job.n_vectors = 64;
  const auto more = evolve_correlation(job);
  CHECK(more.stderrs[5] < typ.stderrs[5]);
  // same seed, same result; thread count does not change it
  job.n_vectors = 4;
  const auto r1 = evolve_correlation(job);
  job.n_threads = 3;
  const auto r2 = evolve_correlation(job);
  CHECK(r1.values == r2.values);
}

TEST_CASE("free-fermion solver matches dense for the DQ chain", "[engine]") {
  const std::size_t L = 10;
  const auto h = chain_h(L, {0.5, 0.0, 0.0});
  const auto ts = grid(20.0, 41);
  for (std::uint32_t site : {0u, 4u, 9u}) {
    const auto a = spin(L, site, Pauli::Z);
    const auto ff = evolve_correlation(make_job(h, a, EngineMethod::free_fermion, ts));
    const auto d = dense_correlation(h, a, a, ts);
    for (std::size_t i = 0; i < ts.size(); ++i) CHECK_THAT(ff.values[i], WithinAbs(d.values[i], 1e-10));
  }
  ChainModel m;
  m.L = L;
  const auto direct = free_fermion_autocorrelation(m, 0.5, 4, ts);
  const auto via_job = evolve_correlation(make_job(h, spin(L, 4, Pauli::Z), EngineMethod::free_fermion, ts));
  for (std::size_t i = 0; i < ts.size(); ++i) CHECK_THAT(direct.values[i], WithinAbs(via_job.values[i], 1e-12));
}

TEST_CASE("conserved quantities have constant autocorrelations", "[engine]") {
  const std::size_t L = 8;
  const auto h = chain_h(L, {-0.15, 0.3, 0.23}, kAllPairs, 3);
  const auto ts = grid(20.0, 11);
  const auto sz = collective_spin(L, Pauli::Z);
  for (auto method : {EngineMethod::dense, EngineMethod::krylov}) {
    auto energy = make_job(h, h, method, ts);
    energy.tolerance = 1e-10;
    const auto ce = evolve_correlation(energy);
    auto spin_job = make_job(h, sz, method, ts);
    spin_job.tolerance = 1e-10;
    const auto cs = evolve_correlation(spin_job);
    for (std::size_t i = 0; i < ts.size(); ++i) {
      CHECK_THAT(ce.values[i], WithinAbs(h.norm2(), 1e-9));
      CHECK_THAT(cs.values[i], WithinAbs(0.25 * L, 1e-9));
    }
  }
}

TEST_CASE("infinite-temperature trace estimate", "[engine]") {
  const auto h = chain_h(10, {-0.15, 0.3, 0.0});
  const auto h2 = h * h;
  const auto est = estimate_infinite_T_trace(h2, 40, 9);
  CHECK(std::abs(est.value - h2.normalized_trace().real()) < 4.0 * est.stderr_);
  CHECK(est.stderr_ < 0.05 * est.value);
}

TEST_CASE("engine input validation", "[engine]") {
  const auto h = chain_h(6, {-0.15, 0.3, 0.0});
  const auto a = spin(6, 2, Pauli::Z);
  CHECK_THROWS_AS(evolve_correlation(make_job(h, a, EngineMethod::dense, {})), ConfigError);
  CHECK_THROWS_AS(evolve_correlation(make_job(h, a, EngineMethod::dense, {1.0, 0.5})), ConfigError);
  CHECK_THROWS_AS(evolve_correlation(make_job(h, a, EngineMethod::free_fermion, {0.0, 1.0})), ConfigError);
  auto job = make_job(h, a, EngineMethod::typicality, {0.0, 1.0});
  job.n_vectors = 0;
  CHECK_THROWS_AS(evolve_correlation(job), ConfigError);
  CHECK_THROWS_AS(parse_engine_method("exact"), ConfigError);
  const auto big = chain_h(15, {-0.15, 0.3, 0.0});
  CHECK_THROWS_AS(evolve_correlation(make_job(big, spin(15, 0, Pauli::Z), EngineMethod::krylov, {0.0})),
                  SizeLimitError);
  CHECK_THROWS_AS(evolve_correlation(make_job(big, spin(15, 0, Pauli::Z), EngineMethod::dense, {0.0})),
                  SizeLimitError);
}
