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

// Pulse sequences, toggling-frame average Hamiltonians, the WAHUHA8 and
// 16-pulse builders and the inverse compiler from (u, v, h) to delays.

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "spinhydro/dense.hpp"
#include "spinhydro/errors.hpp"
#include "spinhydro/model.hpp"
#include "spinhydro/operators.hpp"

namespace spinhydro {

struct SequenceEvent {
  enum class Type { delay, pulse };
  Type type = Type::delay;
  double duration_us = 0.0;  // free evolution (delay events)
  Vec3 axis{1.0, 0.0, 0.0};  // pulse axis
  double angle = 0.0;        // radians
  double width_us = 0.0;     // 0: instantaneous

  static SequenceEvent delay(double us) {
    SequenceEvent e;
    e.type = Type::delay;
    e.duration_us = us;
    return e;
  }
  static SequenceEvent pulse(Vec3 axis, double angle, double width_us = 0.0) {
    SequenceEvent e;
    e.type = Type::pulse;
    e.axis = axis;
    e.angle = angle;
    e.width_us = width_us;
    return e;
  }
  SiteRotation rotation() const { return SiteRotation::about(axis, angle); }
};

inline Vec3 parse_axis(const std::string &s) {
  if (s == "x" || s == "+x") return {1, 0, 0};
  if (s == "-x") return {-1, 0, 0};
  if (s == "y" || s == "+y") return {0, 1, 0};
  if (s == "-y") return {0, -1, 0};
  if (s == "z" || s == "+z") return {0, 0, 1};
  if (s == "-z") return {0, 0, -1};
  throw ConfigError("unknown pulse axis '" + s + "'");
}

inline std::string axis_name(const Vec3 &a) {
  const std::array<std::pair<const char *, Vec3>, 6> named{{{"x", {1, 0, 0}},
                                                           {"-x", {-1, 0, 0}},
                                                           {"y", {0, 1, 0}},
                                                           {"-y", {0, -1, 0}},
                                                           {"z", {0, 0, 1}},
                                                           {"-z", {0, 0, -1}}}};
  for (const auto &[name, v] : named)
    if (v == a) return name;
  return {};
}

struct PulseSequence {
  std::vector<SequenceEvent> events;
  bool cyclic = true;  // net toggling rotation must be the identity

  PulseSequence &delay(double us) {
    if (us < 0.0) throw InfeasibleError("negative delay " + std::to_string(us) + " us");
    events.push_back(SequenceEvent::delay(us));
    return *this;
  }
  PulseSequence &pulse(const std::string &axis, double angle, double width_us = 0.0) {
    events.push_back(SequenceEvent::pulse(parse_axis(axis), angle, width_us));
    return *this;
  }
  PulseSequence &pulse(Vec3 axis, double angle, double width_us = 0.0) {
    events.push_back(SequenceEvent::pulse(axis, angle, width_us));
    return *this;
  }
  PulseSequence &append(const PulseSequence &o) {
    events.insert(events.end(), o.events.begin(), o.events.end());
    return *this;
  }

  /** Total duration: delays plus pulse widths. */
  double cycle_time_us() const {
    double t = 0.0;
    for (const auto &e : events) t += e.type == SequenceEvent::Type::delay ? e.duration_us : e.width_us;
    return t;
  }

  double total_delay_us() const {
    double t = 0.0;
    for (const auto &e : events)
      if (e.type == SequenceEvent::Type::delay) t += e.duration_us;
    return t;
  }

  bool has_finite_pulses() const {
    return std::any_of(events.begin(), events.end(), [](const SequenceEvent &e) {
      return e.type == SequenceEvent::Type::pulse && e.width_us > 0.0;
    });
  }

  SiteRotation net_rotation() const {
    SiteRotation q;
    for (const auto &e : events)
      if (e.type == SequenceEvent::Type::pulse) q = e.rotation().after(q);
    return q;
  }

  /** Same timing with every pulse collapsed to its midpoint. */
  PulseSequence as_delta() const {
    PulseSequence out;
    out.cyclic = cyclic;
    double pending = 0.0;
    for (const auto &e : events) {
      if (e.type == SequenceEvent::Type::delay) {
        pending += e.duration_us;
      } else {
        pending += 0.5 * e.width_us;
        out.events.push_back(SequenceEvent::delay(pending));
        out.events.push_back(SequenceEvent::pulse(e.axis, e.angle, 0.0));
        pending = 0.5 * e.width_us;
      }
    }
    out.events.push_back(SequenceEvent::delay(pending));
    return out;
  }
};

// ---------------------------------------------------------------------------
// Builders

/**
 * Two concatenated WAHUHA cycles, pulses x, y, -y, -x, -x, -y, y, x. Delays
 * are pulse-centre spacings; finite widths are carved out of the delays.
 */
inline PulseSequence wahuha8(double tau_us = 5.0, double width_us = 0.0) {
  const double h = std::numbers::pi / 2.0;
  const std::array<const char *, 8> axes{"x", "y", "-y", "-x", "-x", "-y", "y", "x"};
  const std::array<double, 9> spacing{1, 1, 2, 1, 2, 1, 2, 1, 1};
  PulseSequence seq;
  for (std::size_t k = 0; k < 9; ++k) {
    const double edges = (k == 0 || k == 8) ? 0.5 : 1.0;
    const double free = spacing[k] * tau_us - edges * width_us;
    if (free < 0.0) throw InfeasibleError("wahuha8: pulse width exceeds the delay");
    seq.delay(free);
    if (k < 8) seq.pulse(axes[k], h, width_us);
  }
  return seq;
}

struct SequenceParams {
  double u = 0.0, v = 0.0, w = 0.0, a = 0.0, b = 0.0, c = 0.0;
  double tau0 = 5.0;  // us

  bool operator==(const SequenceParams &) const = default;
};

struct SixteenPulseDelays {
  double tau1, tau2, tau3, tau1p, tau2p, tau3p;

  std::array<std::pair<const char *, double>, 6> named() const {
    return {{{"tau1", tau1},
             {"tau2", tau2},
             {"tau3", tau3},
             {"tau1'", tau1p},
             {"tau2'", tau2p},
             {"tau3'", tau3p}}};
  }
};

inline SixteenPulseDelays sixteen_pulse_delays(const SequenceParams &p) {
  return {p.tau0 * (1 + p.c - p.v + p.w), p.tau0 * (1 + p.b - p.u + p.v),
          p.tau0 * (1 - p.a + p.u - p.w), p.tau0 * (1 - p.c - p.v + p.w),
          p.tau0 * (1 - p.b - p.u + p.v), p.tau0 * (1 + p.a + p.u - p.w)};
}

/**
 * Checks the delays against the pulse width: outer delays (tau1, tau1',
 * tau3, tau3') border one pulse per half and need >= width/2, the inner
 * tau2, tau2' sit between two pulses and need >= width.
 */
inline void check_sixteen_pulse_delays(const SixteenPulseDelays &d, double width_us) {
  for (const auto &[name, value] : d.named()) {
    const std::string n = name;
    const double need = (n == "tau2" || n == "tau2'") ? width_us : 0.5 * width_us;
    if (value < need - 1e-12) {
      std::string msg = "delay " + n + " = " + std::to_string(value) + " us";
      msg += need > 0.0 ? " is shorter than the required " + std::to_string(need) + " us"
                        : " is negative";
      throw InfeasibleError(msg);
    }
  }
}

/** Four 4-pulse blocks; 16 pi/2 pulses with pulse-centre delays summing to 24 tau0. */
inline PulseSequence sixteen_pulse(const SequenceParams &p, double width_us = 0.0) {
  const auto d = sixteen_pulse_delays(p);
  check_sixteen_pulse_delays(d, width_us);
  const double h = std::numbers::pi / 2.0;
  PulseSequence seq;
  auto block = [&](double t1, const char *n1, double t2, const char *n2, double t3,
                   const char *n3, double t4, const char *n4, double t5) {
    seq.delay(t1 - 0.5 * width_us);
    seq.pulse(n1, h, width_us);
    seq.delay(t2 - width_us);
    seq.pulse(n2, h, width_us);
    seq.delay(t3 - width_us);
    seq.pulse(n3, h, width_us);
    seq.delay(t4 - width_us);
    seq.pulse(n4, h, width_us);
    seq.delay(t5 - 0.5 * width_us);
  };
  block(d.tau1, "x", d.tau2, "y", 2 * d.tau3, "y", d.tau2p, "x", d.tau1p);
  block(d.tau1p, "x", d.tau2, "y", 2 * d.tau3p, "y", d.tau2p, "x", d.tau1);
  block(d.tau1, "-x", d.tau2p, "-y", 2 * d.tau3p, "-y", d.tau2, "-x", d.tau1p);
  block(d.tau1p, "-x", d.tau2p, "-y", 2 * d.tau3, "-y", d.tau2, "-x", d.tau1);
  return seq;
}

// ---------------------------------------------------------------------------
// Average Hamiltonian

struct TogglingInterval {
  double duration_us = 0.0;
  SiteRotation frame;  // accumulated lab rotation Q (map for Q sigma Q^dagger)
};

inline std::vector<TogglingInterval> toggling_intervals(const PulseSequence &seq) {
  std::vector<TogglingInterval> out;
  SiteRotation q;
  for (const auto &e : seq.events) {
    if (e.type == SequenceEvent::Type::pulse) {
      q = e.rotation().after(q);
    } else if (e.duration_us > 0.0) {
      out.push_back({e.duration_us, q});
    }
  }
  return out;
}

/**
 * Order 0: sum_k (t_k/T) Q_k^dagger H Q_k. Order 1 adds the first Magnus
 * commutator (-i/2T) sum_{l>k} t_l t_k [H_l, H_k] with times in ms.
 */
inline OperatorSum average_hamiltonian(const PulseSequence &seq, const OperatorSum &h, int order = 0,
                                       bool allow_noncyclic = false) {
  if (order != 0 && order != 1) throw ConfigError("average_hamiltonian: order must be 0 or 1");
  if (seq.has_finite_pulses())
    throw ConfigError(
        "average_hamiltonian: finite-width pulses; use simulate_finite_pulses or as_delta()");
  if (seq.cyclic && !allow_noncyclic && !seq.net_rotation().is_identity(1e-10))
    throw ConfigError("average_hamiltonian: sequence is not cyclic (net rotation != identity)");
  const auto intervals = toggling_intervals(seq);
  const double total = seq.total_delay_us();
  if (!(total > 0.0)) throw ConfigError("average_hamiltonian: zero total duration");
  std::vector<OperatorSum> frames;
  frames.reserve(intervals.size());
  OperatorSum avg(h.length());
  for (const auto &iv : intervals) {
    frames.push_back(conjugate(h, iv.frame.inverse()));
    avg += frames.back() * (iv.duration_us / total);
  }
  if (order == 1) {
    OperatorSum corr(h.length());
    for (std::size_t l = 0; l < frames.size(); ++l)
      for (std::size_t k = 0; k < l; ++k)
        corr += commutator(frames[l], frames[k]) * (intervals[l].duration_us * intervals[k].duration_us);
    // durations are in us and H in krad/s (rad/ms): one factor 1e-3 converts t_l t_k / T to ms
    avg += corr * Complex{0.0, -0.5e-3 / total};
  }
  return avg.pruned();
}

/**
 * Closed-form first-order Floquet Hamiltonian of the 16-pulse sequence on a
 * dipolar chain with fields w (krad/s): (1/2) sum J_jk [(u-w) SxSx + (v-u)
 * SySy + (w-v) SzSz] + (1/3) sum w_j (a Sx + b Sy + c Sz).
 */
inline OperatorSum sixteen_pulse_floquet(const ChainModel &m, const SequenceParams &p,
                                         const std::vector<double> &w) {
  OperatorSum op(m.L);
  for (const auto &pr : coupled_pairs(m)) {
    const double jj = m.J / (pr.r * pr.r * pr.r);
    add_spin_pair_terms(op, pr.j, pr.k, 0.5 * jj * (p.u - p.w), 0.5 * jj * (p.v - p.u),
                        0.5 * jj * (p.w - p.v));
  }
  if (w.size() != m.L) throw ConfigError("field length does not match L");
  for (std::uint32_t j = 0; j < m.L; ++j) {
    const double s = 0.5 * w[j] / 3.0;
    if (s == 0.0) continue;
    if (p.a != 0.0) op.add_term(PauliString::single(j, Pauli::X), s * p.a);
    if (p.b != 0.0) op.add_term(PauliString::single(j, Pauli::Y), s * p.b);
    if (p.c != 0.0) op.add_term(PauliString::single(j, Pauli::Z), s * p.c);
  }
  return op;
}

/** max over pairs |c_xx + c_yy + c_zz| relative to the largest coupling. */
inline double interaction_zero_sum_residual(const OperatorSum &op) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> sums;
  double scale = 0.0;
  for (const auto &[s, c] : op.terms()) {
    if (s.weight() != 2) continue;
    const auto f = s.factors();
    if (f[0].axis != f[1].axis) continue;
    sums[{f[0].site, f[1].site}] += c.real();
    scale = std::max(scale, std::abs(c.real()));
  }
  double worst = 0.0;
  for (const auto &[_, v] : sums) worst = std::max(worst, std::abs(v));
  return scale > 0.0 ? worst / scale : 0.0;
}

// ---------------------------------------------------------------------------
// Compiler: target (u, v, h) -> 16-pulse parameters

struct CompileResult {
  SequenceParams params;
  SixteenPulseDelays delays{};
  double gauge = 0.0;
  double pulse_width_us = 0.0;
};

/**
 * Solves (u_s - w_s)/2 = u, (v_s - u_s)/2 = -u - v, (w_s - v_s)/2 = v and
 * c/3 = h with a = b = 0. The common shift g = w_s is chosen to minimize
 * max|parameter|; delays only depend on differences so feasibility does not.
 */
inline CompileResult compile_target(const ChainModel &model, const HamiltonianParams &target,
                                    double tau0_us = 5.0, double pulse_width_us = 1.02) {
  model.validate();
  target.validate();
  if (!(tau0_us > 0.0)) throw ConfigError("compile_target: tau0 must be positive");
  if (pulse_width_us < 0.0) throw ConfigError("compile_target: pulse width must be >= 0");
  const std::array<double, 3> pts{-2.0 * target.u, 2.0 * target.v, 0.0};
  const double g = -0.5 * (*std::max_element(pts.begin(), pts.end()) +
                           *std::min_element(pts.begin(), pts.end()));
  CompileResult r;
  r.gauge = g;
  r.pulse_width_us = pulse_width_us;
  r.params = {g + 2.0 * target.u, g - 2.0 * target.v, g, 0.0, 0.0, 3.0 * target.h, tau0_us};
  for (double *x : {&r.params.u, &r.params.v, &r.params.w, &r.params.c})
    if (*x == 0.0) *x = 0.0;  // normalize -0
  r.delays = sixteen_pulse_delays(r.params);
  check_sixteen_pulse_delays(r.delays, pulse_width_us);
  return r;
}

// ---------------------------------------------------------------------------
// Dense cycle simulation

struct FiniteCycleReport {
  double cycle_time_us = 0.0;
  double distance = 0.0;  // ||U - exp(-i H_F T)||_2
  double residual = 0.0;  // distance / (T in ms), effective-Hamiltonian error in krad/s
  DenseMatrix unitary;
};

/** Exact cycle propagator; H in krad/s, pulses act as angle/width n.S during their width. */
inline DenseMatrix cycle_unitary(const PulseSequence &seq, const OperatorSum &h,
                                 std::size_t limit = kDenseMaxSites) {
  const std::size_t L = h.length();
  check_dense_size(L, limit);
  const std::size_t dim = std::size_t{1} << L;
  const DenseMatrix hd = to_dense(h, limit);
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(hd);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  auto free_evolution = [&](double t_ms) -> DenseMatrix {
    const Eigen::VectorXcd ph = (es.eigenvalues().array() * Complex{0.0, -t_ms}).exp().matrix();
    return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
  };
  DenseMatrix u = DenseMatrix::Identity(dim, dim);
  for (const auto &e : seq.events) {
    if (e.type == SequenceEvent::Type::delay) {
      if (e.duration_us > 0.0) u = free_evolution(e.duration_us * 1e-3) * u;
    } else if (e.width_us == 0.0) {
      apply_collective_left(u, spin_half_rotation(e.axis, e.angle), L);
    } else {
      const double t_ms = e.width_us * 1e-3;
      const double n = std::sqrt(e.axis[0] * e.axis[0] + e.axis[1] * e.axis[1] + e.axis[2] * e.axis[2]);
      OperatorSum drive(L);
      for (int a = 0; a < 3; ++a)
        if (e.axis[a] != 0.0)
          drive += collective_spin(L, static_cast<Pauli>(a + 1)) * (e.angle / t_ms * e.axis[a] / n);
      u = expm_hermitian(hd + to_dense(drive, limit), t_ms) * u;
    }
  }
  return u;
}

inline FiniteCycleReport simulate_finite_pulses(const PulseSequence &seq, const OperatorSum &h,
                                                std::size_t L, std::size_t limit = kDenseMaxSites) {
  if (h.length() != L) throw ConfigError("simulate_finite_pulses: operator length != L");
  check_dense_size(L, limit);
  FiniteCycleReport rep;
  rep.cycle_time_us = seq.cycle_time_us();
  rep.unitary = cycle_unitary(seq, h, limit);
  const OperatorSum hf = average_hamiltonian(seq.as_delta(), h, 0);
  const DenseMatrix target = expm_hermitian(to_dense(hf, limit), rep.cycle_time_us * 1e-3);
  const DenseMatrix w = target.adjoint() * rep.unitary;
  Eigen::ComplexEigenSolver<DenseMatrix> ces(w, false);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < ces.eigenvalues().size(); ++k)
    worst = std::max(worst, std::abs(ces.eigenvalues()[k] - Complex{1.0, 0.0}));
  rep.distance = worst;
  rep.residual = rep.cycle_time_us > 0.0 ? worst / (rep.cycle_time_us * 1e-3) : 0.0;
  return rep;
}

// ---------------------------------------------------------------------------
// JSON form: list of {type, axis, angle_deg, width_us, delay_us}

inline nlohmann::json to_json(const PulseSequence &seq) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto &e : seq.events) {
    nlohmann::json j;
    if (e.type == SequenceEvent::Type::delay) {
      j["type"] = "delay";
      j["delay_us"] = e.duration_us;
    } else {
      j["type"] = "pulse";
      const auto name = axis_name(e.axis);
      if (name.empty())
        j["axis"] = {e.axis[0], e.axis[1], e.axis[2]};
      else
        j["axis"] = name;
      j["angle_deg"] = e.angle * 180.0 / std::numbers::pi;
      j["width_us"] = e.width_us;
    }
    arr.push_back(j);
  }
  return arr;
}

inline PulseSequence sequence_from_json(const nlohmann::json &arr) {
  if (!arr.is_array()) throw ConfigError("sequence JSON must be an array of events");
  PulseSequence seq;
  for (const auto &j : arr) {
    const std::string type = j.value("type", "");
    if (type == "delay") {
      seq.delay(j.at("delay_us").get<double>());
    } else if (type == "pulse") {
      Vec3 axis;
      if (j.at("axis").is_string()) {
        axis = parse_axis(j.at("axis").get<std::string>());
      } else {
        const auto v = j.at("axis").get<std::vector<double>>();
        if (v.size() != 3) throw ConfigError("pulse axis must have 3 components");
        axis = {v[0], v[1], v[2]};
      }
      seq.pulse(axis, j.at("angle_deg").get<double>() * std::numbers::pi / 180.0,
                j.value("width_us", 0.0));
    } else {
      throw ConfigError("unknown sequence event type '" + type + "'");
    }
  }
  return seq;
}

}  // namespace spinhydro
