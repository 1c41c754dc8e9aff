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

// Hydrodynamic analysis of correlation curves: power-law exponent fits,
// windowed sweeps, diffusion constants and normalisation.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "spinhydro/engine.hpp"
#include "spinhydro/errors.hpp"
#include "spinhydro/model.hpp"

namespace spinhydro {

inline constexpr double kSpinFitStart = 7.7;
inline constexpr double kEnergyFitStart = 2.2;
inline constexpr double kDiffusionFitStart = 7.7;
inline constexpr double kDiffusionFitEnd = 60.0;

/** C(t) ~ prefactor * t^{-1/z} over [t_start, t_end]. */
struct ExponentFit {
  double z = 0.0;
  double z_err = 0.0;
  double t_start = 0.0;
  double t_end = 0.0;
  double prefactor = 0.0;
  double prefactor_err = 0.0;
  double goodness = 0.0;  // chi^2 per degree of freedom with the fit weights
  std::size_t n_points = 0;
  bool z_fixed = false;  // true for the constrained diffusive model
};

struct FitOptions {
  double significance = 3.0;  // drop points with value < significance * stderr
  bool use_envelope = false;  // fit the local maxima instead of the raw curve
};

/**
 * Local maxima of a curve, each refined by a parabola through the three
 * neighbouring grid points. Used for oscillating (ballistic) curves.
 */
inline CorrelationCurve local_maxima_envelope(const CorrelationCurve &c) {
  c.validate();
  CorrelationCurve env;
  env.label = c.label + "_envelope";
  env.normalization = c.normalization;
  for (std::size_t k = 1; k + 1 < c.size(); ++k) {
    const double y0 = c.values[k - 1], y1 = c.values[k], y2 = c.values[k + 1];
    if (!(y1 > y0 && y1 >= y2)) continue;
    const double t0 = c.times[k - 1], t1 = c.times[k], t2 = c.times[k + 1];
    // parabola through the three points
    const double d0 = (y1 - y0) / (t1 - t0);
    const double d1 = (y2 - y1) / (t2 - t1);
    const double a = (d1 - d0) / (t2 - t0);
    double tp = t1, yp = y1;
    if (a < 0.0) {
      const double b = d0 - a * (t0 + t1);
      tp = std::clamp(-b / (2.0 * a), t0, t2);
      yp = y1 + (tp - t1) * (d0 + a * (tp - t0));
    }
    if (!env.times.empty() && tp <= env.times.back()) continue;
    env.times.push_back(tp);
    env.values.push_back(yp);
    env.stderrs.push_back(c.stderrs[k]);
    env.n_samples.push_back(c.n_samples.empty() ? 0 : c.n_samples[k]);
  }
  return env;
}

namespace detail {

struct LogPoints {
  std::vector<double> x, y, sigma;
  bool weighted = true;
};

inline void check_window(const CorrelationCurve &c, double t_start, double t_end) {
  c.validate();
  if (!(t_start < t_end)) throw ConfigError("fit window needs t_start < t_end");
  if (c.times.empty() || t_start < c.times.front() - 1e-12 || t_end > c.times.back() + 1e-12)
    throw ConfigError("fit window [" + std::to_string(t_start) + ", " + std::to_string(t_end) +
                      "] lies outside the curve");
}

/** Window points of the curve (or of its envelope) in log-log form. */
inline LogPoints window_points(const CorrelationCurve &curve, double t_start, double t_end,
                               const FitOptions &opt) {
  check_window(curve, t_start, t_end);
  const CorrelationCurve c = opt.use_envelope ? local_maxima_envelope(curve) : curve;
  const double significance = opt.significance;
  LogPoints p;
  bool any_zero_err = false;
  for (std::size_t k = 0; k < c.size(); ++k) {
    const double t = c.times[k];
    if (t < t_start - 1e-12 || t > t_end + 1e-12 || t <= 0.0) continue;
    const double v = c.values[k];
    const double e = c.stderrs[k];
    if (e > 0.0 && v < significance * e) continue;
    if (!(v > 0.0))
      throw NumericalError("non-positive value " + std::to_string(v) + " at t = " +
                           std::to_string(t) + " inside the fit window");
    p.x.push_back(std::log(t));
    p.y.push_back(std::log(v));
    p.sigma.push_back(e / v);
    any_zero_err |= (e <= 0.0);
  }
  if (p.x.empty()) throw ConfigError("fit window is empty");
  if (p.x.size() < 4)
    throw ConfigError("fit window holds " + std::to_string(p.x.size()) +
                      " usable points; at least 4 are needed");
  p.weighted = !any_zero_err;
  return p;
}

}  // namespace detail

/**
 * Weighted least squares of log C against log t. Weights are 1/(stderr/C)^2
 * when every point carries an error, uniform otherwise (then the slope error
 * comes from the residual scatter).
 */
inline ExponentFit fit_exponent(const CorrelationCurve &curve, double t_start, double t_end,
                                const FitOptions &opt = {}) {
  const auto p = detail::window_points(curve, t_start, t_end, opt);
  const std::size_t n = p.x.size();
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = p.weighted ? 1.0 / (p.sigma[i] * p.sigma[i]) : 1.0;
    sw += w;
    sx += w * p.x[i];
    sy += w * p.y[i];
    sxx += w * p.x[i] * p.x[i];
    sxy += w * p.x[i] * p.y[i];
  }
  const double delta = sw * sxx - sx * sx;
  if (!(delta > 0.0)) throw NumericalError("degenerate fit window (all times equal)");
  const double slope = (sw * sxy - sx * sy) / delta;
  const double icpt = (sxx * sy - sx * sxy) / delta;
  double chi2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = p.y[i] - icpt - slope * p.x[i];
    chi2 += p.weighted ? r * r / (p.sigma[i] * p.sigma[i]) : r * r;
  }
  const double dof = static_cast<double>(n - 2);
  const double scale = p.weighted ? 1.0 : chi2 / dof;
  const double var_slope = scale * sw / delta;
  const double var_icpt = scale * sxx / delta;
  if (!(slope < 0.0))
    throw NumericalError("curve does not decay in the fit window (slope " + std::to_string(slope) + ")");
  ExponentFit f;
  f.z = -1.0 / slope;
  f.z_err = std::sqrt(var_slope) / (slope * slope);
  f.t_start = t_start;
  f.t_end = t_end;
  f.prefactor = std::exp(icpt);
  f.prefactor_err = f.prefactor * std::sqrt(var_icpt);
  f.goodness = chi2 / dof;
  f.n_points = n;
  return f;
}

/** One fit per window end; t_start is shared. */
inline std::vector<ExponentFit> exponent_sweep(const CorrelationCurve &c, double t_start,
                                               const std::vector<double> &t_ends,
                                               const FitOptions &opt = {}) {
  std::vector<ExponentFit> out;
  out.reserve(t_ends.size());
  for (double te : t_ends) out.push_back(fit_exponent(c, t_start, te, opt));
  return out;
}

/** Fits C = A t^{-1/2}; the result carries z = 2 with z_fixed set. */
inline ExponentFit fit_diffusive(const CorrelationCurve &curve, double t_start = kDiffusionFitStart,
                                 double t_end = kDiffusionFitEnd, const FitOptions &opt = {}) {
  const auto p = detail::window_points(curve, t_start, t_end, opt);
  const std::size_t n = p.x.size();
  double sw = 0, sr = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = p.weighted ? 1.0 / (p.sigma[i] * p.sigma[i]) : 1.0;
    sw += w;
    sr += w * (p.y[i] + 0.5 * p.x[i]);
  }
  const double log_a = sr / sw;
  double chi2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = p.y[i] + 0.5 * p.x[i] - log_a;
    chi2 += p.weighted ? r * r / (p.sigma[i] * p.sigma[i]) : r * r;
  }
  const double dof = static_cast<double>(n - 1);
  const double var = (p.weighted ? 1.0 : chi2 / dof) / sw;
  ExponentFit f;
  f.z = 2.0;
  f.z_err = 0.0;
  f.z_fixed = true;
  f.t_start = t_start;
  f.t_end = t_end;
  f.prefactor = std::exp(log_a);
  f.prefactor_err = f.prefactor * std::sqrt(var);
  f.goodness = chi2 / dof;
  f.n_points = n;
  return f;
}

/**
 * D from a diffusive fit of a return probability normalised to 1 at t = 0:
 * C(t) = a / sqrt(4 pi D t), so D = a^2 / (4 pi A^2). The result is in
 * units of lattice_constant^2 times the inverse time unit of the curve.
 */
inline double diffusion_constant(const ExponentFit &fit, double lattice_constant = 1.0) {
  if (!fit.z_fixed) throw ConfigError("diffusion_constant needs a fit with z fixed to 2 (fit_diffusive)");
  if (!(fit.prefactor > 0.0)) throw NumericalError("diffusion_constant: non-positive prefactor");
  if (!(lattice_constant > 0.0)) throw ConfigError("lattice constant must be positive");
  return lattice_constant * lattice_constant / (4.0 * std::numbers::pi * fit.prefactor * fit.prefactor);
}

/** D in nm^2/ms for a curve in units of 1/J (J in rad/ms). */
inline double diffusion_constant_nm2_per_ms(const ExponentFit &fit, const ChainModel &model) {
  const double a_nm = 0.1 * model.lattice_constant_angstrom;
  return diffusion_constant(fit, a_nm) * std::abs(model.J);
}

// ---------------------------------------------------------------------------
// Normalisation

inline void check_same_grid(const CorrelationCurve &a, const CorrelationCurve &b) {
  if (a.size() != b.size()) throw ConfigError("curves have different grid lengths");
  for (std::size_t k = 0; k < a.size(); ++k)
    if (std::abs(a.times[k] - b.times[k]) > 1e-9 * std::max(1.0, std::abs(a.times[k])))
      throw ConfigError("curves have different time grids at index " + std::to_string(k));
}

/** Pointwise local / global with first-order error propagation. */
inline CorrelationCurve normalize_by_global(const CorrelationCurve &local,
                                            const CorrelationCurve &global) {
  local.validate();
  global.validate();
  check_same_grid(local, global);
  CorrelationCurve out = local;
  out.normalization = CorrelationCurve::Normalization::by_global;
  for (std::size_t k = 0; k < local.size(); ++k) {
    const double g = global.values[k];
    if (g == 0.0)
      throw NumericalError("global curve vanishes at t = " + std::to_string(local.times[k]));
    const double r = local.values[k] / g;
    const double el = local.stderrs[k] / g;
    const double eg = r * global.stderrs[k] / g;
    out.values[k] = r;
    out.stderrs[k] = std::sqrt(el * el + eg * eg);
  }
  return out;
}

/** C(t)/C(0); the t = 0 point is taken as exact. */
inline CorrelationCurve normalize_by_initial(const CorrelationCurve &c) {
  c.validate();
  if (c.times.empty() || c.times.front() != 0.0) throw ConfigError("normalize_by_initial needs t = 0 on the grid");
  const double c0 = c.values.front();
  if (c0 == 0.0) throw NumericalError("normalize_by_initial: C(0) = 0");
  CorrelationCurve out = c;
  out.normalization = CorrelationCurve::Normalization::by_initial;
  for (std::size_t k = 0; k < c.size(); ++k) {
    out.values[k] /= c0;
    out.stderrs[k] /= std::abs(c0);
  }
  return out;
}

/**
 * Last time up to which two curves of the same observable (e.g. two chain
 * lengths) agree: |a - b| <= max(n_sigma * combined error, rel_tol * |a|)
 * at every grid point from t = 0. Returns the first grid time if they differ
 * immediately.
 */
inline double agreement_window(const CorrelationCurve &a, const CorrelationCurve &b,
                               double rel_tol = 0.05, double n_sigma = 3.0) {
  check_same_grid(a, b);
  double last = a.times.empty() ? 0.0 : a.times.front();
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double se = std::hypot(a.stderrs[k], b.stderrs[k]);
    const double tol = std::max(n_sigma * se, rel_tol * std::abs(a.values[k]));
    if (std::abs(a.values[k] - b.values[k]) > tol) break;
    last = a.times[k];
  }
  return last;
}

// ---------------------------------------------------------------------------
// I/O

inline void write_curve_csv(std::ostream &os, const CorrelationCurve &c) {
  c.validate();
  os << "t_over_J_inverse,value,stderr,n_samples\n";
  os.precision(17);
  for (std::size_t k = 0; k < c.size(); ++k)
    os << c.times[k] << ',' << c.values[k] << ',' << c.stderrs[k] << ','
       << (c.n_samples.empty() ? 0 : c.n_samples[k]) << '\n';
}

inline CorrelationCurve read_curve_csv(std::istream &is, const std::string &label = "") {
  CorrelationCurve c;
  c.label = label;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("t_over_J_inverse", 0) == 0) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double t, v, e = 0.0;
    std::size_t n = 0;
    if (!(ls >> t >> v)) throw ConfigError("curve CSV line " + std::to_string(lineno) + ": expected t, value");
    ls >> e >> n;
    c.times.push_back(t);
    c.values.push_back(v);
    c.stderrs.push_back(e);
    c.n_samples.push_back(n);
  }
  c.validate();
  return c;
}

inline nlohmann::json to_json(const ExponentFit &f) {
  nlohmann::json j;
  j["z"] = f.z;
  j["z_err"] = f.z_err;
  j["window"] = {f.t_start, f.t_end};
  j["prefactor"] = f.prefactor;
  j["prefactor_err"] = f.prefactor_err;
  j["goodness"] = f.goodness;
  j["n_points"] = f.n_points;
  j["z_fixed"] = f.z_fixed;
  return j;
}

inline void write_sweep_csv(std::ostream &os, const std::vector<ExponentFit> &fits) {
  os << "t_end,z,z_err\n";
  os.precision(17);
  for (const auto &f : fits) os << f.t_end << ',' << f.z << ',' << f.z_err << '\n';
}

}  // namespace spinhydro
