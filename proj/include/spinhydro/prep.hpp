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

// Random Zeeman / random double-quantum observables: closed forms, the full
// pulse-by-pulse preparation with phase cycling, and bath correlation of the
// random coefficients.

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "spinhydro/dense.hpp"
#include "spinhydro/errors.hpp"
#include "spinhydro/model.hpp"
#include "spinhydro/operators.hpp"
#include "spinhydro/sequence.hpp"

namespace spinhydro {

enum class ObservableKind { rZ_x, rZ_y, rZ_z, rDQ_y, rDQ_z };

inline std::string to_string(ObservableKind k) {
  switch (k) {
    case ObservableKind::rZ_x: return "rZ_x";
    case ObservableKind::rZ_y: return "rZ_y";
    case ObservableKind::rZ_z: return "rZ_z";
    case ObservableKind::rDQ_y: return "rDQ_y";
    default: return "rDQ_z";
  }
}

inline ObservableKind parse_observable_kind(const std::string &s) {
  for (auto k : {ObservableKind::rZ_x, ObservableKind::rZ_y, ObservableKind::rZ_z,
                 ObservableKind::rDQ_y, ObservableKind::rDQ_z})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown observable kind '" + s + "'");
}

inline bool is_zeeman(ObservableKind k) {
  return k == ObservableKind::rZ_x || k == ObservableKind::rZ_y || k == ObservableKind::rZ_z;
}

/** One cycle of the encoding sequence, in ms. */
inline constexpr double kWahuhaCycleMs = 0.060;

struct RandomObservable {
  ObservableKind kind = ObservableKind::rZ_z;
  std::vector<double> coeffs;  // alpha_j, or alpha'_j on bonds (j, j+1)
  OperatorSum op;
  double tau_ms = 0.0;
  std::uint64_t seed = 0;
};

inline void check_tau(double tau_ms) {
  if (!(tau_ms > 0.0)) throw ConfigError("encoding time tau must be > 0");
}

/** alpha_j = sin(w_j tau / 3); operator sum_j alpha_j S_axis^j. */
inline RandomObservable closed_form_rz(const DisorderRealization &dis, double tau_ms,
                                       Pauli axis = Pauli::Z) {
  check_tau(tau_ms);
  if (axis == Pauli::I) throw ConfigError("closed_form_rz: axis must be X, Y or Z");
  RandomObservable r;
  r.kind = axis == Pauli::X ? ObservableKind::rZ_x
           : axis == Pauli::Y ? ObservableKind::rZ_y
                              : ObservableKind::rZ_z;
  r.tau_ms = tau_ms;
  r.seed = dis.seed;
  const std::size_t L = dis.w.size();
  r.op = OperatorSum(L);
  for (std::uint32_t j = 0; j < L; ++j) {
    const double a = std::sin(dis.w[j] * tau_ms / 3.0);
    r.coeffs.push_back(a);
    r.op.add_term(PauliString::single(j, axis), 0.5 * a);
  }
  return r;
}

/** Pair operator of a random DQ observable, in the S basis. */
inline void add_dq_pair(OperatorSum &op, ObservableKind kind, std::uint32_t j, std::uint32_t k,
                        double weight) {
  if (kind == ObservableKind::rDQ_y)
    add_spin_pair_terms(op, j, k, -weight, 0.0, weight);  // SzSz - SxSx
  else
    add_spin_pair_terms(op, j, k, weight, -weight, 0.0);  // SxSx - SySy
}

/**
 * (3/4) sum_{j<k} alpha'_jk (pair) / |k-j|^3 with alpha'_jk = sin((w_j + w_k) tau/3).
 * range = 1 keeps nearest neighbours only; coeffs lists the nearest-neighbour values.
 */
inline RandomObservable closed_form_rdq(const DisorderRealization &dis, double tau_ms,
                                        ObservableKind kind = ObservableKind::rDQ_y,
                                        Boundary boundary = Boundary::open,
                                        std::size_t range = 1) {
  check_tau(tau_ms);
  if (is_zeeman(kind)) throw ConfigError("closed_form_rdq: kind must be rDQ_y or rDQ_z");
  const std::size_t L = dis.w.size();
  ChainModel m;
  m.L = L;
  m.boundary = boundary;
  m.coupling_range = range;
  RandomObservable r;
  r.kind = kind;
  r.tau_ms = tau_ms;
  r.seed = dis.seed;
  r.op = OperatorSum(L);
  for (const auto &p : coupled_pairs(m)) {
    const double a = std::sin((dis.w[p.j] + dis.w[p.k]) * tau_ms / 3.0);
    add_dq_pair(r.op, kind, p.j, p.k, 0.75 * a / (p.r * p.r * p.r));
  }
  const std::size_t n_bonds = boundary == Boundary::periodic ? L : L - 1;
  for (std::size_t j = 0; j < n_bonds; ++j)
    r.coeffs.push_back(std::sin((dis.w[j] + dis.w[(j + 1) % L]) * tau_ms / 3.0));
  return r;
}

/** rho -> H Tr(rho H) / Tr(H^2). */
inline OperatorSum thermalization_projection(const OperatorSum &rho, const OperatorSum &h) {
  const double hh = h.norm2();
  if (hh == 0.0) throw ConfigError("thermalization_projection: zero Hamiltonian");
  return h * (normalized_trace_product(rho, h) / hh);
}

/**
 * E[alpha_j alpha_k] for alpha = sin(w tau/3) with w = sum_kappa J_kappa I_z,
 * I_z = +-1/2 independent: (1/2) prod cos((J_j - J_k) tau/6) - (1/2) prod cos((J_j + J_k) tau/6).
 */
inline double spatial_correlation_analytic(const BathModel &bath, const ChainModel &model,
                                           double tau_ms, std::size_t j, std::size_t k) {
  if (bath.mode != BathMode::geometric)
    throw ConfigError("spatial_correlation_analytic needs a geometric bath");
  bath.validate();
  if (j >= model.L || k >= model.L) throw ConfigError("site index outside chain");
  const auto cj = site_couplings(bath, model, j);
  const auto ck = site_couplings(bath, model, k);
  std::map<BathKey, std::pair<double, double>> all;
  for (const auto &[key, c] : cj) all[key].first = c;
  for (const auto &[key, c] : ck) all[key].second = c;
  double minus = 1.0;
  double plus = 1.0;
  for (const auto &[_, c] : all) {
    minus *= std::cos((c.first - c.second) * tau_ms / 6.0);
    plus *= std::cos((c.first + c.second) * tau_ms / 6.0);
  }
  return 0.5 * minus - 0.5 * plus;
}

// ---------------------------------------------------------------------------
// Full sequence simulation

enum class EncodingMode {
  wahuha8,        // literal pulse train, exact propagator
  ideal_average,  // exp(-i Hbar t_c) per cycle, Hbar the WAHUHA8 average Hamiltonian
};

inline EncodingMode parse_encoding_mode(const std::string &s) {
  if (s == "wahuha8") return EncodingMode::wahuha8;
  if (s == "ideal_average") return EncodingMode::ideal_average;
  throw ConfigError("unknown encoding mode '" + s + "'");
}

struct PrepOptions {
  bool with_pi_control = false;       // pi_y after every cycle; refocuses fully for even cycle counts
  EncodingMode encoding = EncodingMode::wahuha8;
  bool include_couplings = true;       // false zeroes the F-F couplings everywhere
  std::optional<double> jb_time_ms;    // Jeener-Broekaert t_e; default maximizes dipolar overlap
  double wahuha_tau_us = 5.0;
  double pulse_width_us = 0.0;
  std::size_t dense_limit = kDenseMaxSites;
};

struct PrepResult {
  RandomObservable observable;
  double jb_time_ms = 0.0;
  double closed_form_overlap = 0.0;  // overlap with the matching closed form
};

namespace detail {

inline Vec3 rotate_z(const Vec3 &a, double phi) {
  return {std::cos(phi) * a[0] - std::sin(phi) * a[1], std::sin(phi) * a[0] + std::cos(phi) * a[1], a[2]};
}

inline PulseSequence phase_shift(const PulseSequence &seq, double phi) {
  PulseSequence out = seq;
  for (auto &e : out.events)
    if (e.type == SequenceEvent::Type::pulse) e.axis = rotate_z(e.axis, phi);
  return out;
}

inline DenseMatrix pulse(const Vec3 &axis, double angle, double phi, std::size_t L) {
  return collective_rotation(rotate_z(axis, phi), angle, L);
}

inline DenseMatrix conj(const DenseMatrix &u, const DenseMatrix &rho) { return u * rho * u.adjoint(); }

inline DenseMatrix matrix_power(DenseMatrix u, std::size_t n) {
  DenseMatrix r = DenseMatrix::Identity(u.rows(), u.cols());
  while (n > 0) {
    if (n & 1) r = u * r;
    n >>= 1;
    if (n) u = u * u;
  }
  return r;
}

}  // namespace detail

class PrepSimulator {
 public:
  PrepSimulator(const ChainModel &model, const DisorderRealization &dis, const PrepOptions &opt)
      : model_(model), dis_(dis), opt_(opt) {
    model.validate();
    check_dense_size(model.L, opt.dense_limit);
    if (dis.w.size() != model.L) throw ConfigError("disorder length does not match L");
    OperatorSum coupling = opt.include_couplings ? build_dipolar(model) : OperatorSum(model.L);
    h_dip_ = coupling + build_field(model.L, dis.w);
    h_dense_ = to_dense(h_dip_, opt.dense_limit);
    eig_.compute(h_dense_);
    if (eig_.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  }

  const OperatorSum &h_dip() const { return h_dip_; }

  /** Encoding propagator for n cycles with all pulses phase-shifted by phi. */
  DenseMatrix encoding(std::size_t n_cycles, bool pi_control, double phi = 0.0) const {
    const auto seq = detail::phase_shift(wahuha8(opt_.wahuha_tau_us, opt_.pulse_width_us), phi);
    DenseMatrix cycle;
    if (opt_.encoding == EncodingMode::wahuha8) {
      cycle = cycle_unitary(seq, h_dip_, opt_.dense_limit);
    } else {
      const auto avg = average_hamiltonian(seq.as_delta(), h_dip_, 0);
      cycle = expm_hermitian(to_dense(avg, opt_.dense_limit), seq.cycle_time_us() * 1e-3);
    }
    if (pi_control) cycle = detail::pulse({0, 1, 0}, std::numbers::pi, phi, model_.L) * cycle;
    return detail::matrix_power(cycle, n_cycles);
  }

  /** Steps 1-4 with the 2-fold (+-x) and 4-fold z phase cycles. */
  DenseMatrix random_zeeman(std::size_t n_cycles) const {
    const std::size_t L = model_.L;
    const DenseMatrix z0 = to_dense(collective_spin(L, Pauli::Z), opt_.dense_limit);
    DenseMatrix acc = DenseMatrix::Zero(z0.rows(), z0.cols());
    for (int k = 0; k < 4; ++k) {
      const double phi = k * std::numbers::pi / 2.0;
      DenseMatrix rho = detail::conj(detail::pulse({0, 1, 0}, std::numbers::pi / 2, phi, L), z0);
      rho = detail::conj(encoding(n_cycles, opt_.with_pi_control, phi), rho);
      const DenseMatrix plus = detail::conj(detail::pulse({1, 0, 0}, std::numbers::pi / 2, phi, L), rho);
      const DenseMatrix minus = detail::conj(detail::pulse({-1, 0, 0}, std::numbers::pi / 2, phi, L), rho);
      acc += 0.5 * (plus - minus);
    }
    return acc / 4.0;
  }

  /** Jeener-Broekaert pair: pi/2_y, free evolution t_e, pi/4 about -x. */
  DenseMatrix jeener_broekaert(double te_ms, double phi = 0.0) const {
    const std::size_t L = model_.L;
    const DenseMatrix z0 = to_dense(collective_spin(L, Pauli::Z), opt_.dense_limit);
    DenseMatrix rho = detail::conj(detail::pulse({0, 1, 0}, std::numbers::pi / 2, phi, L), z0);
    const Eigen::VectorXcd ph = (eig_.eigenvalues().array() * Complex{0.0, -te_ms}).exp().matrix();
    rho = detail::conj(eig_.eigenvectors() * ph.asDiagonal() * eig_.eigenvectors().adjoint(), rho);
    return detail::conj(detail::pulse({-1, 0, 0}, std::numbers::pi / 4, phi, L), rho);
  }

  /** Normalized overlap of the Jeener-Broekaert state with H_dip. */
  double dipolar_fidelity(double te_ms) const {
    const DenseMatrix rho = jeener_broekaert(te_ms);
    const double num = dense_trace_product(rho, h_dense_).real();
    const double den = std::sqrt(dense_trace_product(rho, rho).real() *
                                 dense_trace_product(h_dense_, h_dense_).real());
    return num / den;
  }

  /** Grid search of t_e over (0, 4/J]. */
  double optimal_jb_time() const {
    const double t_max = 4.0 / std::abs(model_.J);
    double best_t = t_max;
    double best = -2.0;
    const int n = 80;
    for (int i = 1; i <= n; ++i) {
      const double t = t_max * i / n;
      const double f = dipolar_fidelity(t);
      if (f > best) {
        best = f;
        best_t = t;
      }
    }
    return best_t;
  }

  /** Steps 1-8 with the (x-y)/(y-x), 4-fold alternating z and +-x phase cycles. */
  DenseMatrix random_dq(std::size_t n_cycles, double te_ms) const {
    const std::size_t L = model_.L;
    const std::size_t dim = std::size_t{1} << L;
    DenseMatrix rho6 = DenseMatrix::Zero(dim, dim);
    for (int k = 0; k < 4; ++k) {
      const double phi = k * std::numbers::pi / 2.0;
      const DenseMatrix rho4 = jeener_broekaert(te_ms, phi);
      const OperatorSum rho5 = thermalization_projection(pauli_decompose(rho4, L), h_dip_);
      const DenseMatrix r5 = to_dense(rho5, opt_.dense_limit);
      const DenseMatrix a = detail::conj(detail::pulse({1, -1, 0}, std::numbers::pi / 2, phi, L), r5);
      const DenseMatrix b = detail::conj(detail::pulse({-1, 1, 0}, std::numbers::pi / 2, phi, L), r5);
      rho6 += (k % 2 == 0 ? 0.5 : -0.5) * (a + b);
    }
    rho6 /= 4.0;
    const DenseMatrix rho7 = detail::conj(encoding(n_cycles, opt_.with_pi_control), rho6);
    const DenseMatrix plus = detail::conj(detail::pulse({1, 0, 0}, std::numbers::pi / 2, 0.0, L), rho7);
    const DenseMatrix minus = detail::conj(detail::pulse({-1, 0, 0}, std::numbers::pi / 2, 0.0, L), rho7);
    return 0.5 * (plus + minus);
  }

 private:
  ChainModel model_;
  DisorderRealization dis_;
  PrepOptions opt_;
  OperatorSum h_dip_;
  DenseMatrix h_dense_;
  Eigen::SelfAdjointEigenSolver<DenseMatrix> eig_;
};

/**
 * Runs the preparation pulse by pulse (dense) and returns the phase-cycled
 * effective observable. rZ_x / rZ_y and rDQ_z are obtained from the z and y
 * forms by a final ideal collective rotation.
 */
inline PrepResult simulate_prep_sequence(ObservableKind kind, const ChainModel &model,
                                         const DisorderRealization &dis, std::size_t n_cycles,
                                         const PrepOptions &opt = {}) {
  if (n_cycles < 1) throw ConfigError("simulate_prep_sequence: n_cycles must be >= 1");
  const PrepSimulator sim(model, dis, opt);
  const double tau_ms = static_cast<double>(n_cycles) * opt.wahuha_tau_us * 12.0 * 1e-3;
  PrepResult res;
  RandomObservable &r = res.observable;
  r.kind = kind;
  r.tau_ms = tau_ms;
  r.seed = dis.seed;
  const std::size_t L = model.L;
  if (is_zeeman(kind)) {
    OperatorSum op = pauli_decompose(sim.random_zeeman(n_cycles), L);
    if (kind == ObservableKind::rZ_x) op = conjugate(op, SiteRotation::about({0, 1, 0}, std::numbers::pi / 2));
    if (kind == ObservableKind::rZ_y) op = conjugate(op, SiteRotation::about({1, 0, 0}, -std::numbers::pi / 2));
    const Pauli axis = kind == ObservableKind::rZ_x ? Pauli::X
                       : kind == ObservableKind::rZ_y ? Pauli::Y
                                                      : Pauli::Z;
    for (std::uint32_t j = 0; j < L; ++j)
      r.coeffs.push_back(2.0 * op.coefficient(PauliString::single(j, axis)).real());
    r.op = op.real_part().pruned(1e-13);
    const auto cf = closed_form_rz(dis, tau_ms, axis);
    res.closed_form_overlap = r.op.norm2() > 0.0 ? overlap(r.op, cf.op) : 0.0;
  } else {
    res.jb_time_ms = opt.jb_time_ms ? *opt.jb_time_ms : sim.optimal_jb_time();
    OperatorSum op = pauli_decompose(sim.random_dq(n_cycles, res.jb_time_ms), L);
    if (kind == ObservableKind::rDQ_z)
      op = conjugate(op, SiteRotation::about({1, 1, 1}, 2.0 * std::numbers::pi / 3.0));
    for (std::uint32_t j = 0; j + 1 < L; ++j) {
      double c;
      if (kind == ObservableKind::rDQ_y)
        c = op.coefficient(PauliString::pair(j, Pauli::Z, j + 1, Pauli::Z)).real() -
            op.coefficient(PauliString::pair(j, Pauli::X, j + 1, Pauli::X)).real();
      else
        c = op.coefficient(PauliString::pair(j, Pauli::X, j + 1, Pauli::X)).real() -
            op.coefficient(PauliString::pair(j, Pauli::Y, j + 1, Pauli::Y)).real();
      r.coeffs.push_back(c * 16.0 / 3.0 / 2.0);
    }
    r.op = op.real_part().pruned(1e-13);
    const auto cf = closed_form_rdq(dis, tau_ms, kind, model.boundary, model.coupling_range);
    res.closed_form_overlap =
        (r.op.norm2() > 0.0 && cf.op.norm2() > 0.0) ? overlap(r.op, cf.op) : 0.0;
  }
  return res;
}

}  // namespace spinhydro
