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
#include <numbers>
#include <random>
#include <sstream>

#include "spinhydro/transport.hpp"

using namespace spinhydro;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

CorrelationCurve make_curve(double t0, double t1, std::size_t n, const std::function<double(double)> &f,
                            double rel_err = 0.0) {
  CorrelationCurve c;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = t0 + (t1 - t0) * static_cast<double>(k) / static_cast<double>(n - 1);
    c.times.push_back(t);
    c.values.push_back(f(t));
    c.stderrs.push_back(rel_err * f(t));
    c.n_samples.push_back(1);
  }
  return c;
}

/**
 * Return probability of a continuous-time lattice random walk (hop rate
 * gamma to each neighbour, so D = gamma) sampled by Monte Carlo.
 */
CorrelationCurve random_walk_return(double gamma, std::size_t walkers, const std::vector<double> &ts,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> wait(2.0 * gamma);
  std::bernoulli_distribution coin(0.5);
  std::vector<std::size_t> home(ts.size(), 0);
  for (std::size_t w = 0; w < walkers; ++w) {
    long x = 0;
    double t = wait(rng);
    for (std::size_t k = 0; k < ts.size(); ++k) {
      while (t <= ts[k]) {
        x += coin(rng) ? 1 : -1;
        t += wait(rng);
      }
      home[k] += x == 0;
    }
  }
  CorrelationCurve c;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const double p = static_cast<double>(home[k]) / static_cast<double>(walkers);
    c.times.push_back(ts[k]);
    c.values.push_back(p);
    c.stderrs.push_back(std::sqrt(p * (1.0 - p) / static_cast<double>(walkers)));
    c.n_samples.push_back(walkers);
  }
  return c;
}

}  // namespace

TEST_CASE("exact power laws are recovered", "[transport]") {
  for (double z : {1.0, 1.5, 2.0, 0.8}) {
    const auto c = make_curve(0.5, 80.0, 160, [z](double t) { return 3.0 * std::pow(t, -1.0 / z); });
    for (auto [ts, te] : {std::pair{1.0, 10.0}, {7.7, 60.0}, {2.2, 79.0}}) {
      const auto f = fit_exponent(c, ts, te);
      CHECK_THAT(f.z, WithinAbs(z, 1e-10));
      CHECK_THAT(f.prefactor, WithinRel(3.0, 1e-10));
    }
    // weighted path: relative errors proportional to the value
    const auto cw = make_curve(0.5, 80.0, 160, [z](double t) { return std::pow(t, -1.0 / z); }, 0.01);
    CHECK_THAT(fit_exponent(cw, 7.7, 60.0).z, WithinAbs(z, 1e-10));
  }
}

TEST_CASE("scale invariance and error scaling", "[transport]") {
  const auto c = make_curve(1.0, 60.0, 120, [](double t) { return std::pow(t, -0.5) * (1.0 + 0.05 * std::sin(t)); }, 0.01);
  auto scaled = c;
  for (auto &v : scaled.values) v *= 7.0;
  for (auto &e : scaled.stderrs) e *= 7.0;
  const auto f1 = fit_exponent(c, 7.7, 60.0);
  const auto f2 = fit_exponent(scaled, 7.7, 60.0);
  CHECK_THAT(f2.z, WithinAbs(f1.z, 1e-12));
  CHECK_THAT(f2.prefactor / f1.prefactor, WithinRel(7.0, 1e-10));
  // four times the samples halves the errors and halves z_err
  auto quarter = c;
  for (auto &e : quarter.stderrs) e *= 0.5;
  CHECK_THAT(fit_exponent(quarter, 7.7, 60.0).z_err, WithinRel(0.5 * f1.z_err, 1e-10));
}

TEST_CASE("sweeps of the window end", "[transport]") {
  const auto flat = make_curve(0.5, 60.0, 240, [](double t) { return std::pow(t, -0.5); });
  for (const auto &f : exponent_sweep(flat, kSpinFitStart, {15.0, 20.0, 30.0, 45.0, 60.0}))
    CHECK_THAT(f.z, WithinAbs(2.0, 1e-10));
  // crossover from ballistic to diffusive at t = 10; the slower branch dominates late
  const double c0 = std::pow(10.0, -0.5);
  const auto cross = make_curve(0.5, 200.0, 800, [c0](double t) { return std::max(1.0 / t, c0 * std::pow(t, -0.5)); });
  const auto fits = exponent_sweep(cross, 1.0, {5.0, 15.0, 30.0, 60.0, 120.0, 200.0});
  CHECK_THAT(fits.front().z, WithinAbs(1.0, 1e-10));
  for (std::size_t k = 1; k < fits.size(); ++k) CHECK(fits[k].z > fits[k - 1].z);
  CHECK(fits.back().z > 1.5);
  CHECK(fits.back().z < 2.0);
}

TEST_CASE("fit preconditions", "[transport]") {
  const auto c = make_curve(0.0, 10.0, 11, [](double t) { return 1.0 / (1.0 + t); });
  CHECK_THROWS_AS(fit_exponent(c, 2.0, 4.0), ConfigError);   // three points only
  CHECK_THROWS_AS(fit_exponent(c, 5.0, 5.0), ConfigError);   // empty window
  CHECK_THROWS_AS(fit_exponent(c, 2.0, 12.0), ConfigError);  // outside the curve
  auto neg = c;
  neg.values[6] = -0.01;
  CHECK_THROWS_AS(fit_exponent(neg, 1.0, 9.0), NumericalError);
  const auto growing = make_curve(1.0, 10.0, 10, [](double t) { return t; });
  CHECK_THROWS_AS(fit_exponent(growing, 1.0, 10.0), NumericalError);
  // insignificant points are dropped before the positivity check
  auto noisy = make_curve(1.0, 20.0, 20, [](double t) { return std::pow(t, -1.0); }, 0.01);
  noisy.values[15] = -0.001;
  noisy.stderrs[15] = 0.01;
  CHECK_THAT(fit_exponent(noisy, 1.0, 20.0).z, WithinAbs(1.0, 1e-10));
}

TEST_CASE("envelope fits of oscillating curves", "[transport]") {
  const auto c = make_curve(0.05, 60.0, 1200, [](double t) {
    const double s = std::sin(2.0 * t);
    return (1.0 + s * s) / t * 0.25;
  });
  const auto env = local_maxima_envelope(c);
  CHECK(env.size() >= 30);
  FitOptions opt;
  opt.use_envelope = true;
  CHECK_THAT(fit_exponent(c, 5.0, 50.0, opt).z, WithinAbs(1.0, 0.01));
}

TEST_CASE("diffusion constant from a lattice random walk", "[transport]") {
  std::vector<double> ts;
  for (int k = 1; k <= 120; ++k) ts.push_back(0.5 * k);
  const double gamma = 0.5;
  const auto c = random_walk_return(gamma, 200000, ts, 2024);
  const auto fit = fit_diffusive(c, kDiffusionFitStart, kDiffusionFitEnd);
  CHECK(fit.z_fixed);
  CHECK_THAT(diffusion_constant(fit), WithinRel(gamma, 0.05));
  // free exponent of the same curve is diffusive
  CHECK_THAT(fit_exponent(c, kDiffusionFitStart, kDiffusionFitEnd).z, WithinAbs(2.0, 0.1));
  // D scales as 1 / A^2 and as the lattice constant squared
  auto f2 = fit;
  f2.prefactor *= 2.0;
  CHECK_THAT(diffusion_constant(f2), WithinRel(diffusion_constant(fit) / 4.0, 1e-12));
  CHECK_THAT(diffusion_constant(fit, 3.0), WithinRel(9.0 * diffusion_constant(fit), 1e-12));
  ChainModel m;
  CHECK_THAT(diffusion_constant_nm2_per_ms(fit, m),
             WithinRel(diffusion_constant(fit) * 0.3442 * 0.3442 * 30.4, 1e-12));
  CHECK_THROWS_AS(diffusion_constant(fit_exponent(c, 7.7, 60.0)), ConfigError);
}

TEST_CASE("normalization by the global curve", "[transport]") {
  const auto local = make_curve(0.0, 10.0, 11, [](double t) { return 0.25 / (1.0 + t); }, 0.01);
  const auto r = normalize_by_global(local, local);
  for (double v : r.values) CHECK_THAT(v, WithinAbs(1.0, 1e-15));
  CHECK(r.normalization == CorrelationCurve::Normalization::by_global);
  const auto constant = make_curve(0.0, 10.0, 11, [](double) { return 2.0; });
  const auto s = normalize_by_global(local, constant);
  for (std::size_t k = 0; k < s.size(); ++k) {
    CHECK_THAT(s.values[k], WithinAbs(local.values[k] / 2.0, 1e-15));
    CHECK_THAT(s.stderrs[k], WithinAbs(local.stderrs[k] / 2.0, 1e-15));
  }
  const auto other = make_curve(0.0, 5.0, 11, [](double) { return 1.0; });
  CHECK_THROWS_AS(normalize_by_global(local, other), ConfigError);
  auto zero = constant;
  zero.values[3] = 0.0;
  CHECK_THROWS_AS(normalize_by_global(local, zero), NumericalError);
  const auto init = normalize_by_initial(local);
  CHECK(init.values.front() == 1.0);
}

TEST_CASE("agreement window of two chain lengths", "[transport]") {
  const auto a = make_curve(0.0, 20.0, 21, [](double t) { return 1.0 / (1.0 + t); });
  auto b = a;
  for (std::size_t k = 12; k < b.size(); ++k) b.values[k] *= 1.2;
  CHECK(agreement_window(a, b) == 11.0);
  CHECK(agreement_window(a, a) == 20.0);
}

TEST_CASE("curve CSV and fit JSON", "[transport]") {
  const auto c = make_curve(0.0, 3.0, 7, [](double t) { return std::exp(-t) / 3.0; }, 0.1);
  std::stringstream ss;
  write_curve_csv(ss, c);
  const auto back = read_curve_csv(ss);
  CHECK(back.times == c.times);
  CHECK(back.values == c.values);
  CHECK(back.stderrs == c.stderrs);
  std::stringstream bad("t_over_J_inverse,value\n1,x\n");
  CHECK_THROWS_AS(read_curve_csv(bad), ConfigError);
  const auto j = to_json(fit_exponent(make_curve(1.0, 10.0, 10, [](double t) { return 1.0 / t; }), 1.0, 10.0));
  CHECK_THAT(j["z"].get<double>(), WithinAbs(1.0, 1e-10));
  CHECK(j["window"].size() == 2);
}
