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

// Infinite-temperature correlation functions C(t) = Tr[A(t) B]/2^L.
//
// Methods: dense exact diagonalization, exact traces by Lanczos propagation
// of every basis state, stochastic typicality with random-phase vectors, and
// the free-fermion solution of the nearest-neighbour u-only chain.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "spinhydro/dense.hpp"
#include "spinhydro/errors.hpp"
#include "spinhydro/model.hpp"
#include "spinhydro/operators.hpp"
#include "spinhydro/rng.hpp"

namespace spinhydro {

inline constexpr std::size_t kStateVectorMaxSites = 26;

using StateVector = std::vector<Complex>;

/** Time grid, values and errors of one correlation function. */
struct CorrelationCurve {
  enum class Normalization { raw, by_global, by_initial };

  std::vector<double> times;  // units of 1/J
  std::vector<double> values;
  std::vector<double> stderrs;
  std::vector<std::size_t> n_samples;
  std::string label;
  Normalization normalization = Normalization::raw;

  std::size_t size() const { return times.size(); }

  void validate() const {
    if (values.size() != times.size() || stderrs.size() != times.size())
      throw ConfigError("CorrelationCurve: column lengths differ");
    for (std::size_t k = 1; k < times.size(); ++k)
      if (!(times[k] > times[k - 1])) throw ConfigError("CorrelationCurve: times must increase");
    for (double v : values)
      if (!std::isfinite(v)) throw NumericalError("CorrelationCurve: non-finite value");
  }
};

inline std::string to_string(CorrelationCurve::Normalization n) {
  switch (n) {
    case CorrelationCurve::Normalization::raw: return "raw";
    case CorrelationCurve::Normalization::by_global: return "by_global";
    default: return "by_initial";
  }
}

// ---------------------------------------------------------------------------
// Sparse action of an operator on state vectors

/**
 * Operator compiled for repeated application. Terms are grouped by their
 * flip mask; (A psi)[s] = sum_x sum_t c_t i^{nY} (-1)^{|(s^x) & z_t|} psi[s^x].
 * Every output entry is written once, so threaded application is
 * deterministic.
 */
class SpinOperator {
 public:
  SpinOperator() = default;

  explicit SpinOperator(const OperatorSum &op, std::size_t n_threads = 1)
      : length_(op.length()), n_threads_(std::max<std::size_t>(1, n_threads)) {
    if (length_ > kStateVectorMaxSites)
      throw SizeLimitError("state-vector methods limited to L <= " +
                           std::to_string(kStateVectorMaxSites));
    dim_ = std::size_t{1} << length_;
    std::map<std::uint64_t, std::vector<Term>> groups;
    std::vector<Term> diag_terms;
    for (const auto &[s, c] : op.terms()) {
      const auto pm = pauli_masks(s);
      const Complex coeff = c * detail::i_power(pm.n_y);
      if (pm.x == 0)
        diag_terms.push_back({pm.z, coeff});
      else
        groups[pm.x].push_back({pm.z, coeff});
    }
    for (auto &[x, terms] : groups) {
      Group g{x, std::move(terms), true};
      for (const auto &t : g.terms) g.real &= std::abs(t.c.imag()) == 0.0;
      groups_.push_back(std::move(g));
    }
    diag_real_ = true;
    for (const auto &t : diag_terms) diag_real_ &= t.c.imag() == 0.0;
    if (!diag_terms.empty()) {
      diagonal_.assign(dim_, Complex{});
      for (std::size_t s = 0; s < dim_; ++s) {
        Complex v{};
        for (const auto &t : diag_terms) v += (std::popcount(s & t.z) & 1) ? -t.c : t.c;
        diagonal_[s] = v;
      }
    }
  }

  std::size_t length() const { return length_; }
  std::size_t dim() const { return dim_; }

  /** out = A in. */
  void apply(const StateVector &in, StateVector &out) const {
    out.resize(dim_);
    run_chunks([&](std::size_t lo, std::size_t hi) { apply_range(in, out, lo, hi); });
  }

  /** <a|b>. */
  static Complex dot(const StateVector &a, const StateVector &b) {
    Complex s{};
    for (std::size_t k = 0; k < a.size(); ++k) s += std::conj(a[k]) * b[k];
    return s;
  }

  /** <a| A |b>. */
  Complex expectation(const StateVector &a, const StateVector &b) const {
    StateVector tmp;
    apply(b, tmp);
    return dot(a, tmp);
  }

 private:
  struct Term {
    std::uint64_t z;
    Complex c;
  };
  struct Group {
    std::uint64_t x;
    std::vector<Term> terms;
    bool real;
  };

  void run_chunks(const std::function<void(std::size_t, std::size_t)> &f) const {
    const std::size_t nt = std::min<std::size_t>(n_threads_, std::max<std::size_t>(1, dim_ >> 12));
    if (nt <= 1) {
      f(0, dim_);
      return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (dim_ + nt - 1) / nt;
    for (std::size_t t = 0; t < nt; ++t) {
      const std::size_t lo = t * chunk;
      const std::size_t hi = std::min(dim_, lo + chunk);
      if (lo < hi) pool.emplace_back(f, lo, hi);
    }
    for (auto &th : pool) th.join();
  }

  void apply_range(const StateVector &in, StateVector &out, std::size_t lo, std::size_t hi) const {
    if (diagonal_.empty()) {
      for (std::size_t s = lo; s < hi; ++s) out[s] = Complex{};
    } else if (diag_real_) {
      for (std::size_t s = lo; s < hi; ++s) out[s] = diagonal_[s].real() * in[s];
    } else {
      for (std::size_t s = lo; s < hi; ++s) out[s] = diagonal_[s] * in[s];
    }
    for (const auto &g : groups_) {
      if (g.real && g.terms.size() <= 2) {
        const double c0 = g.terms[0].c.real();
        const std::uint64_t z0 = g.terms[0].z;
        const bool two = g.terms.size() == 2;
        const double c1 = two ? g.terms[1].c.real() : 0.0;
        const std::uint64_t z1 = two ? g.terms[1].z : 0;
        for (std::size_t s = lo; s < hi; ++s) {
          const std::size_t src = s ^ g.x;
          double m = (std::popcount(src & z0) & 1) ? -c0 : c0;
          if (two) m += (std::popcount(src & z1) & 1) ? -c1 : c1;
          out[s] += m * in[src];
        }
      } else {
        for (std::size_t s = lo; s < hi; ++s) {
          const std::size_t src = s ^ g.x;
          Complex m{};
          for (const auto &t : g.terms) m += (std::popcount(src & t.z) & 1) ? -t.c : t.c;
          out[s] += m * in[src];
        }
      }
    }
  }

  std::size_t length_ = 0;
  std::size_t dim_ = 0;
  std::size_t n_threads_ = 1;
  std::vector<Group> groups_;
  std::vector<Complex> diagonal_;
  bool diag_real_ = true;
};

// ---------------------------------------------------------------------------
// Lanczos propagation

struct KrylovOptions {
  double tolerance = 1e-10;     // local error target per grid interval
  std::size_t max_dim = 40;
  std::size_t min_dim = 4;
};

/** Statistics returned by a propagation, for tests and reports. */
struct KrylovStats {
  std::size_t steps = 0;
  std::size_t matvecs = 0;
  double max_error_estimate = 0.0;
};

/**
 * psi <- exp(-i H dt) psi by adaptive Lanczos. The subspace grows until the
 * a posteriori error |beta_m (e_m^T exp(-i T dt) e_1)| falls below tol; if the
 * maximum dimension is reached the step is halved.
 */
inline void krylov_step(const SpinOperator &h, StateVector &psi, double dt, double tol,
                        const KrylovOptions &opt, KrylovStats &stats) {
  const double norm0 = std::sqrt(SpinOperator::dot(psi, psi).real());
  if (norm0 == 0.0 || dt == 0.0) return;
  double remaining = dt;
  double sub = dt;
  std::vector<StateVector> basis;
  while (remaining > 0.0) {
    sub = std::min(sub, remaining);
    const double nrm = std::sqrt(SpinOperator::dot(psi, psi).real());
    basis.clear();
    basis.emplace_back(psi.size());
    for (std::size_t s = 0; s < psi.size(); ++s) basis[0][s] = psi[s] / nrm;
    std::vector<double> alpha;
    std::vector<double> beta;
    StateVector w;
    bool accepted = false;
    Eigen::VectorXcd coeffs;
    for (std::size_t m = 1; m <= opt.max_dim; ++m) {
      h.apply(basis[m - 1], w);
      ++stats.matvecs;
      const double a = SpinOperator::dot(basis[m - 1], w).real();
      alpha.push_back(a);
      for (std::size_t s = 0; s < w.size(); ++s) {
        w[s] -= a * basis[m - 1][s];
        if (m >= 2) w[s] -= beta[m - 2] * basis[m - 2][s];
      }
      // full reorthogonalization keeps the small tridiagonal problem honest
      for (std::size_t k = 0; k < m; ++k) {
        const Complex p = SpinOperator::dot(basis[k], w);
        for (std::size_t s = 0; s < w.size(); ++s) w[s] -= p * basis[k][s];
      }
      const double b = std::sqrt(SpinOperator::dot(w, w).real());
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
      for (std::size_t k = 0; k < m; ++k) {
        t(k, k) = alpha[k];
        if (k + 1 < m) t(k, k + 1) = t(k + 1, k) = beta[k];
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
      auto propagate = [&](double tt) {
        const Eigen::VectorXcd ph = (es.eigenvalues().cast<Complex>().array() * Complex{0.0, -tt}).exp().matrix();
        const Eigen::VectorXcd e1 = es.eigenvectors().row(0).transpose().cast<Complex>();
        return Eigen::VectorXcd(es.eigenvectors().cast<Complex>() * ph.cwiseProduct(e1));
      };
      const bool invariant = b < 1e-12 * std::max(1.0, std::abs(a));
      if (m >= opt.min_dim || invariant) {
        coeffs = propagate(sub);
        const double err = invariant ? 0.0 : b * std::abs(coeffs(m - 1));
        if (err <= tol) {
          stats.max_error_estimate = std::max(stats.max_error_estimate, err);
          accepted = true;
          break;
        }
        if (m == opt.max_dim) break;
      }
      if (invariant) break;
      beta.push_back(b);
      basis.emplace_back(w.size());
      for (std::size_t s = 0; s < w.size(); ++s) basis.back()[s] = w[s] / b;
    }
    if (!accepted) {
      sub *= 0.5;
      if (sub < 1e-12 * dt) throw NumericalError("krylov_step: step size underflow");
      continue;
    }
    for (std::size_t s = 0; s < psi.size(); ++s) {
      Complex v{};
      for (Eigen::Index k = 0; k < coeffs.size(); ++k) v += coeffs(k) * basis[static_cast<std::size_t>(k)][s];
      psi[s] = nrm * v;
    }
    ++stats.steps;
    remaining -= sub;
    if (remaining < 1e-14 * dt) remaining = 0.0;
  }
}

// ---------------------------------------------------------------------------
// Correlation methods

enum class EngineMethod { dense, krylov, typicality, free_fermion };

inline std::string to_string(EngineMethod m) {
  switch (m) {
    case EngineMethod::dense: return "dense";
    case EngineMethod::krylov: return "krylov";
    case EngineMethod::typicality: return "typicality";
    default: return "free_fermion";
  }
}

inline EngineMethod parse_engine_method(const std::string &s) {
  for (auto m : {EngineMethod::dense, EngineMethod::krylov, EngineMethod::typicality,
                 EngineMethod::free_fermion})
    if (to_string(m) == s) return m;
  throw ConfigError("unknown engine method '" + s + "'");
}

struct EvolutionJob {
  OperatorSum H;  // in units of J
  OperatorSum A;
  OperatorSum B;
  std::vector<double> t_grid;
  EngineMethod method = EngineMethod::typicality;
  std::size_t n_vectors = 20;
  double tolerance = 1e-8;
  std::uint64_t seed = 1;
  std::size_t n_threads = 1;

  void validate() const {
    if (t_grid.empty()) throw ConfigError("EvolutionJob: empty time grid");
    if (t_grid.front() < 0.0) throw ConfigError("EvolutionJob: times must be >= 0");
    for (std::size_t k = 1; k < t_grid.size(); ++k)
      if (!(t_grid[k] > t_grid[k - 1])) throw ConfigError("EvolutionJob: times must increase");
    if (!(tolerance > 0.0)) throw ConfigError("EvolutionJob: tolerance must be > 0");
    H.check_length(A);
    H.check_length(B);
  }
};

/** Dense C(t) = sum_mn e^{i(E_m - E_n) t} A_mn B_nm / 2^L in the eigenbasis of H. */
inline CorrelationCurve dense_correlation(const OperatorSum &h, const OperatorSum &a,
                                          const OperatorSum &b, const std::vector<double> &t_grid) {
  check_dense_size(h.length());
  const std::size_t dim = std::size_t{1} << h.length();
  const DenseMatrix hd = to_dense(h);
  Eigen::VectorXd evals;
  DenseMatrix at;
  DenseMatrix bt;
  const bool real = h.is_hermitian() && hd.imag().cwiseAbs().maxCoeff() == 0.0;
  const DenseMatrix ad = to_dense(a);
  const DenseMatrix bd = to_dense(b);
  const bool real_ops = ad.imag().cwiseAbs().maxCoeff() == 0.0 && bd.imag().cwiseAbs().maxCoeff() == 0.0;
  if (real && real_ops) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hd.real());
    if (es.info() != Eigen::Success) throw NumericalError("dense eigendecomposition failed");
    evals = es.eigenvalues();
    const Eigen::MatrixXd &v = es.eigenvectors();
    at = (v.transpose() * (ad.real() * v)).cast<Complex>();
    bt = (v.transpose() * (bd.real() * v)).cast<Complex>();
  } else {
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(hd);
    if (es.info() != Eigen::Success) throw NumericalError("dense eigendecomposition failed");
    evals = es.eigenvalues();
    const DenseMatrix &v = es.eigenvectors();
    at = v.adjoint() * ad * v;
    bt = v.adjoint() * bd * v;
  }
  // weights W_mn = A_mn B_nm
  const DenseMatrix w = at.cwiseProduct(bt.transpose());
  CorrelationCurve c;
  c.label = "dense";
  for (double t : t_grid) {
    Eigen::VectorXcd ph(dim);
    for (std::size_t m = 0; m < dim; ++m) ph(m) = std::exp(Complex{0.0, evals(m) * t});
    const Complex v = ph.transpose() * w * ph.conjugate();
    c.times.push_back(t);
    c.values.push_back(v.real() / static_cast<double>(dim));
    c.stderrs.push_back(0.0);
    c.n_samples.push_back(1);
  }
  return c;
}

namespace detail {

inline StateVector random_phase_vector(std::size_t dim, Rng &rng) {
  StateVector v(dim);
  const double amp = 1.0 / std::sqrt(static_cast<double>(dim));
  for (auto &x : v) {
    const double phi = 2.0 * std::numbers::pi * rng.uniform();
    x = amp * Complex{std::cos(phi), std::sin(phi)};
  }
  return v;
}

/** Re <psi(t)| A |phi(t)> with psi(0) = v, phi(0) = B v along the grid. */
inline std::vector<double> propagate_pair(const SpinOperator &h, const SpinOperator &a,
                                          const SpinOperator &b, StateVector psi,
                                          const std::vector<double> &t_grid, double tolerance,
                                          KrylovStats &stats) {
  StateVector phi;
  b.apply(psi, phi);
  std::vector<double> out;
  KrylovOptions opt;
  const double per_step = tolerance / static_cast<double>(std::max<std::size_t>(1, t_grid.size()));
  double t_prev = 0.0;
  for (double t : t_grid) {
    const double dt = t - t_prev;
    if (dt > 0.0) {
      krylov_step(h, psi, dt, per_step, opt, stats);
      krylov_step(h, phi, dt, per_step, opt, stats);
    }
    t_prev = t;
    out.push_back(a.expectation(psi, phi).real());
  }
  return out;
}

}  // namespace detail

/** Mean and standard error over per-sample curves, index-ordered reduction. */
inline CorrelationCurve reduce_samples(const std::vector<std::vector<double>> &samples,
                                       const std::vector<double> &t_grid, const std::string &label) {
  CorrelationCurve c;
  c.label = label;
  c.times = t_grid;
  const std::size_t n = samples.size();
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    double mean = 0.0;
    for (const auto &s : samples) mean += s[k];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const auto &s : samples) var += (s[k] - mean) * (s[k] - mean);
    const double se = n > 1 ? std::sqrt(var / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    c.values.push_back(mean);
    c.stderrs.push_back(se);
    c.n_samples.push_back(n);
  }
  return c;
}

/**
 * Per-vector typicality curves: one random-phase vector per sample, seeded by
 * (seed, vector index) so results do not depend on the thread count.
 */
inline std::vector<std::vector<double>> typicality_samples(const EvolutionJob &job,
                                                           KrylovStats *stats_out = nullptr) {
  const SpinOperator h(job.H, job.n_threads);
  const SpinOperator a(job.A, job.n_threads);
  const SpinOperator b(job.B, job.n_threads);
  std::vector<std::vector<double>> samples;
  KrylovStats stats;
  for (std::size_t v = 0; v < job.n_vectors; ++v) {
    Rng rng(job.seed, {0x74797069u, v});
    samples.push_back(detail::propagate_pair(h, a, b, detail::random_phase_vector(h.dim(), rng),
                                             job.t_grid, job.tolerance, stats));
  }
  if (stats_out) *stats_out = stats;
  return samples;
}

/**
 * Exact trace by Krylov propagation of every computational basis state
 * (C = sum_s <s|A(t) B|s>/2^L); intended for fixture-sized chains.
 */
inline CorrelationCurve krylov_exact_correlation(const EvolutionJob &job) {
  const SpinOperator h(job.H, job.n_threads);
  const SpinOperator a(job.A, job.n_threads);
  const SpinOperator b(job.B, job.n_threads);
  const std::size_t dim = h.dim();
  if (job.H.length() > 14)
    throw SizeLimitError("krylov exact trace limited to L <= 14; use typicality");
  std::vector<double> acc(job.t_grid.size(), 0.0);
  KrylovStats stats;
  // diagonal B: B|s> = b_s |s>, so one propagation per basis state suffices
  bool diagonal_b = true;
  for (const auto &[str, _] : job.B.terms()) diagonal_b &= pauli_masks(str).x == 0;
  const double per_step =
      job.tolerance / static_cast<double>(std::max<std::size_t>(1, job.t_grid.size()));
  for (std::size_t s = 0; s < dim; ++s) {
    StateVector e(dim, Complex{});
    e[s] = 1.0;
    if (diagonal_b) {
      StateVector be;
      b.apply(e, be);
      const double bs = be[s].real();
      if (bs == 0.0) continue;
      double t_prev = 0.0;
      for (std::size_t k = 0; k < job.t_grid.size(); ++k) {
        krylov_step(h, e, job.t_grid[k] - t_prev, per_step, KrylovOptions{}, stats);
        t_prev = job.t_grid[k];
        acc[k] += bs * a.expectation(e, e).real();
      }
    } else {
      const auto v = detail::propagate_pair(h, a, b, e, job.t_grid, job.tolerance, stats);
      for (std::size_t k = 0; k < v.size(); ++k) acc[k] += v[k];
    }
  }
  CorrelationCurve c;
  c.label = "krylov";
  c.times = job.t_grid;
  for (double x : acc) {
    c.values.push_back(x / static_cast<double>(dim));
    c.stderrs.push_back(0.0);
    c.n_samples.push_back(dim);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Free fermions

/**
 * Checks that h is sum_j g_j (XX - YY) on nearest-neighbour bonds of an open
 * chain and returns the couplings g_j (sigma basis).
 */
inline std::vector<double> free_fermion_couplings(const OperatorSum &h) {
  const std::size_t L = h.length();
  std::vector<double> g(L > 0 ? L - 1 : 0, 0.0);
  std::vector<bool> seen_x(g.size(), false);
  std::vector<bool> seen_y(g.size(), false);
  std::vector<double> gy(g.size(), 0.0);
  for (const auto &[s, c] : h.terms()) {
    const auto f = s.factors();
    const bool ok = f.size() == 2 && f[1].site == f[0].site + 1 && f[0].axis == f[1].axis &&
                    f[0].axis != Pauli::Z && std::abs(c.imag()) < 1e-14;
    if (!ok)
      throw ConfigError("free_fermion: Hamiltonian term '" + s.str() +
                        "' is outside the nearest-neighbour XX - YY form");
    const std::size_t j = f[0].site;
    if (f[0].axis == Pauli::X) {
      g[j] = c.real();
      seen_x[j] = true;
    } else {
      gy[j] = c.real();
      seen_y[j] = true;
    }
  }
  for (std::size_t j = 0; j < g.size(); ++j)
    if (std::abs(g[j] + gy[j]) > 1e-12 * std::max(1.0, std::abs(g[j])))
      throw ConfigError("free_fermion: XX and YY couplings must be opposite (u-only model)");
  return g;
}

/**
 * Tr[S_z^j(t) S_z^j]/2^L for H = sum_b g_b (X_b X_{b+1} - Y_b Y_{b+1}) on an
 * open chain (sigma basis). A pi rotation about x on every other site maps it
 * to the XX chain, Jordan-Wigner to hopping 2 g_b, and C = |G_jj(t)|^2/4.
 */
inline CorrelationCurve free_fermion_from_couplings(const std::vector<double> &g, std::size_t site,
                                                    const std::vector<double> &t_grid) {
  const std::size_t L = g.size() + 1;
  if (site >= L) throw ConfigError("free_fermion: site outside chain");
  Eigen::MatrixXd hop = Eigen::MatrixXd::Zero(L, L);
  for (std::size_t j = 0; j + 1 < L; ++j) hop(j, j + 1) = hop(j + 1, j) = 2.0 * g[j];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hop);
  if (es.info() != Eigen::Success) throw NumericalError("free_fermion: eigensolver failed");
  const Eigen::VectorXd weight = es.eigenvectors().row(static_cast<Eigen::Index>(site)).array().square();
  CorrelationCurve c;
  c.label = "free_fermion";
  for (double t : t_grid) {
    Complex gjj{};
    for (Eigen::Index k = 0; k < weight.size(); ++k)
      gjj += weight(k) * std::exp(Complex{0.0, -es.eigenvalues()(k) * t});
    c.times.push_back(t);
    c.values.push_back(0.25 * std::norm(gjj));
    c.stderrs.push_back(0.0);
    c.n_samples.push_back(1);
  }
  return c;
}

/** Case-1 chain: H/J = u sum (SxSx - SySy) on nearest neighbours, open boundary. */
inline CorrelationCurve free_fermion_autocorrelation(const ChainModel &model, double u, std::size_t site,
                                                     const std::vector<double> &t_grid) {
  model.validate();
  if (model.coupling_range != 1)
    throw ConfigError("free_fermion: requires nearest-neighbour coupling (coupling_range = 1)");
  if (model.boundary != Boundary::open) throw ConfigError("free_fermion: requires an open chain");
  const std::vector<double> g(model.L - 1, 0.25 * u);
  return free_fermion_from_couplings(g, site, t_grid);
}

// ---------------------------------------------------------------------------
// Dispatcher

/** Local-site autocorrelation helper for free_fermion jobs: A = B = S_z^j. */
inline std::optional<std::size_t> single_site_sz(const OperatorSum &a) {
  if (a.size() != 1) return std::nullopt;
  const auto &[s, c] = *a.terms().begin();
  if (s.weight() != 1 || s.factors()[0].axis != Pauli::Z || std::abs(c - Complex{0.5, 0.0}) > 1e-14)
    return std::nullopt;
  return s.factors()[0].site;
}

inline CorrelationCurve evolve_correlation(const EvolutionJob &job) {
  job.validate();
  switch (job.method) {
    case EngineMethod::dense: {
      auto c = dense_correlation(job.H, job.A, job.B, job.t_grid);
      return c;
    }
    case EngineMethod::krylov:
      return krylov_exact_correlation(job);
    case EngineMethod::typicality: {
      if (job.n_vectors < 1) throw ConfigError("typicality needs n_vectors >= 1");
      return reduce_samples(typicality_samples(job), job.t_grid, "typicality");
    }
    case EngineMethod::free_fermion: {
      const auto j = single_site_sz(job.A);
      if (!j || !(job.A == job.B))
        throw ConfigError("free_fermion: A and B must both be S_z on one site");
      return free_fermion_from_couplings(free_fermion_couplings(job.H), *j, job.t_grid);
    }
  }
  throw ConfigError("unknown method");
}

/** Tr[A]/2^L estimated with random-phase vectors. */
struct TraceEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

inline TraceEstimate estimate_infinite_T_trace(const OperatorSum &a, std::size_t n_vectors,
                                               std::uint64_t seed, std::size_t n_threads = 1) {
  if (n_vectors < 1) throw ConfigError("estimate_infinite_T_trace: n_vectors must be >= 1");
  const SpinOperator op(a, n_threads);
  std::vector<double> vals;
  for (std::size_t v = 0; v < n_vectors; ++v) {
    Rng rng(seed, {0x74726163u, v});
    const auto psi = detail::random_phase_vector(op.dim(), rng);
    vals.push_back(op.expectation(psi, psi).real());
  }
  TraceEstimate est;
  for (double x : vals) est.value += x;
  est.value /= static_cast<double>(n_vectors);
  if (n_vectors > 1) {
    double var = 0.0;
    for (double x : vals) var += (x - est.value) * (x - est.value);
    est.stderr_ = std::sqrt(var / static_cast<double>(n_vectors - 1) / static_cast<double>(n_vectors));
  }
  return est;
}

}  // namespace spinhydro
