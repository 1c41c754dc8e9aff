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

// Multiple-quantum-coherence tomography. A Hermitian observable
// O = sum_j sum_lm a_lm^(j) T_lm^(j) is probed through
//   I(phi, theta, gamma) = Tr[U O U^dag O] / 2^L
//                        = L sum_lmm' c_lmm' e^{-i m' phi} d^l_{mm'}(theta) e^{-i m gamma},
// c_lmm' = mean_j a_lm conj(a_lm'), with U = Rz(phi) Ry(theta) Rz(gamma).

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "spinhydro/dense.hpp"
#include "spinhydro/errors.hpp"
#include "spinhydro/operators.hpp"
#include "spinhydro/prep.hpp"

namespace spinhydro {

inline constexpr int kScanPoints = 8;
inline constexpr double kScanStepDeg = 45.0;
inline constexpr int kMqcMaxL = 3;

// ---------------------------------------------------------------------------
// Wigner little-d

namespace detail {
inline double factorial(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}
}  // namespace detail

/** d^l_{m m'}(theta) by the explicit finite sum. */
inline double wigner_d(int l, int m, int mp, double theta) {
  if (l < 0 || std::abs(m) > l || std::abs(mp) > l)
    throw ConfigError("wigner_d: need |m|, |m'| <= l, got l = " + std::to_string(l) +
                      ", m = " + std::to_string(m) + ", m' = " + std::to_string(mp));
  const double c = std::cos(theta / 2.0);
  const double s = std::sin(theta / 2.0);
  const double pre = std::sqrt(detail::factorial(l + m) * detail::factorial(l - m) *
                               detail::factorial(l + mp) * detail::factorial(l - mp));
  double sum = 0.0;
  const int k_lo = std::max(0, mp - m);
  const int k_hi = std::min(l + mp, l - m);
  for (int k = k_lo; k <= k_hi; ++k) {
    const double den = detail::factorial(l + mp - k) * detail::factorial(k) *
                       detail::factorial(m - mp + k) * detail::factorial(l - m - k);
    const double sign = ((m - mp + k) % 2 == 0) ? 1.0 : -1.0;
    sum += sign / den * std::pow(c, 2 * l + mp - m - 2 * k) * std::pow(s, m - mp + 2 * k);
  }
  return pre * sum;
}

// ---------------------------------------------------------------------------
// Rotation scans

/** I on the 8 x 8 x 8 grid of (phi, theta, gamma) in steps of 45 degrees. */
struct RotationScan {
  std::size_t L = 0;
  // values[(ip * 8 + it) * 8 + ig]
  std::array<double, kScanPoints * kScanPoints * kScanPoints> values{};

  static double angle(int k) { return k * kScanStepDeg * std::numbers::pi / 180.0; }
  double &at(int ip, int it, int ig) { return values[(ip * kScanPoints + it) * kScanPoints + ig]; }
  double at(int ip, int it, int ig) const { return values[(ip * kScanPoints + it) * kScanPoints + ig]; }
};

enum class ScanMethod { automatic, symbolic, dense };

namespace detail {

inline Eigen::Matrix2cd euler_zyz_matrix(double phi, double theta, double gamma) {
  return spin_half_rotation({0, 0, 1}, phi) * spin_half_rotation({0, 1, 0}, theta) *
         spin_half_rotation({0, 0, 1}, gamma);
}

inline std::size_t max_weight(const OperatorSum &op) {
  std::size_t w = 0;
  for (const auto &[s, _] : op.terms()) w = std::max(w, s.weight());
  return w;
}

}  // namespace detail

/**
 * Exact I(phi, theta, gamma) = Tr[U O U^dag O]/2^L. The symbolic path
 * conjugates Pauli strings; the dense path (L <= 12) is used automatically
 * for operators with long strings, where the symbolic expansion grows as 3^w.
 */
inline RotationScan synthesize_scan(const OperatorSum &op, ScanMethod method = ScanMethod::automatic) {
  if (!op.is_hermitian()) throw ConfigError("synthesize_scan: observable must be Hermitian");
  const std::size_t L = op.length();
  if (method == ScanMethod::automatic)
    method = (detail::max_weight(op) > 4 && L <= kDenseMaxSites) ? ScanMethod::dense : ScanMethod::symbolic;
  RotationScan scan;
  scan.L = L;
  if (method == ScanMethod::symbolic) {
    for (int ip = 0; ip < kScanPoints; ++ip)
      for (int it = 0; it < kScanPoints; ++it)
        for (int ig = 0; ig < kScanPoints; ++ig) {
          const auto rotated = rotate_collective(op, RotationScan::angle(ip), RotationScan::angle(it),
                                                 RotationScan::angle(ig));
          scan.at(ip, it, ig) = normalized_trace_product(rotated, op);
        }
    return scan;
  }
  const DenseMatrix m = to_dense(op);
  for (int ip = 0; ip < kScanPoints; ++ip)
    for (int it = 0; it < kScanPoints; ++it)
      for (int ig = 0; ig < kScanPoints; ++ig) {
        const auto u2 = detail::euler_zyz_matrix(RotationScan::angle(ip), RotationScan::angle(it),
                                                 RotationScan::angle(ig));
        DenseMatrix x = m;
        apply_collective_left(x, u2, L);  // U O
        DenseMatrix y = x.adjoint();      // O U^dag
        apply_collective_left(y, u2, L);  // U O U^dag (O Hermitian)
        scan.at(ip, it, ig) = dense_trace_product(y, m).real();
      }
  return scan;
}

inline RotationScan synthesize_scan(const RandomObservable &obs, ScanMethod method = ScanMethod::automatic) {
  return synthesize_scan(obs.op, method);
}

// ---------------------------------------------------------------------------
// Correlation matrix extraction

struct MqcComponent {
  int l = 0;
  double lambda = 0.0;
  double weight = 0.0;            // sqrt(lambda)
  Eigen::VectorXcd coefficients;  // over m = -l..l
  OperatorSum op;                 // unit-norm Hermitian operator on site 0 / bond (0, 1); empty for l = 3
};

struct MqcSpectrum {
  int l_max = 0;
  std::size_t L = 0;
  std::vector<Eigen::MatrixXcd> c_fit;  // per l, rows/cols m = -l..l, before projection
  std::vector<Eigen::MatrixXcd> c;      // after PSD projection
  std::vector<double> eigenvalues;      // descending, sum 1
  std::vector<MqcComponent> components;
  double residual = 0.0;  // rms(I - model) / rms(I) with the unprojected fit
};

/** Zeroes the negative eigenvalues of the Hermitian part of a. */
inline Eigen::MatrixXcd project_psd(const Eigen::MatrixXcd &a) {
  const Eigen::MatrixXcd h = 0.5 * (a + a.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  if (es.info() != Eigen::Success) throw NumericalError("project_psd: eigensolver failed");
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
}

/** Model signal L sum c_lmm' e^{-i m' phi} d_mm'(theta) e^{-i m gamma}. */
inline double mqc_model_signal(const std::vector<Eigen::MatrixXcd> &c, std::size_t L, double phi,
                               double theta, double gamma) {
  Complex s{};
  for (int l = 0; l < static_cast<int>(c.size()); ++l)
    for (int m = -l; m <= l; ++m)
      for (int mp = -l; mp <= l; ++mp) {
        const Complex cl = c[l](m + l, mp + l);
        if (cl == Complex{}) continue;
        s += cl * std::exp(Complex{0.0, -mp * phi - m * gamma}) * wigner_d(l, m, mp, theta);
      }
  return static_cast<double>(L) * s.real();
}

inline RotationScan synthesize_scan_from_correlation(const std::vector<Eigen::MatrixXcd> &c, std::size_t L) {
  RotationScan scan;
  scan.L = L;
  for (int ip = 0; ip < kScanPoints; ++ip)
    for (int it = 0; it < kScanPoints; ++it)
      for (int ig = 0; ig < kScanPoints; ++ig)
        scan.at(ip, it, ig) = mqc_model_signal(c, L, RotationScan::angle(ip), RotationScan::angle(it),
                                               RotationScan::angle(ig));
  return scan;
}

/**
 * Empirical c_l = (1/L) sum_j a^(j) a^(j)dag from per-site coefficient
 * vectors (a[j][l] over m = -l..l).
 */
inline std::vector<Eigen::MatrixXcd> correlation_from_coefficients(
    const std::vector<std::vector<Eigen::VectorXcd>> &a, int l_max) {
  std::vector<Eigen::MatrixXcd> c;
  for (int l = 0; l <= l_max; ++l) c.push_back(Eigen::MatrixXcd::Zero(2 * l + 1, 2 * l + 1));
  for (const auto &site : a)
    for (int l = 0; l <= l_max && l < static_cast<int>(site.size()); ++l)
      c[l] += site[l] * site[l].adjoint();
  for (auto &m : c) m /= static_cast<double>(a.size());
  return c;
}

/** sum_m v_m T_lm on a short chain, phase-fixed and made Hermitian, unit norm. */
inline OperatorSum component_operator(int l, const Eigen::VectorXcd &v, std::size_t length = 2) {
  OperatorSum k(length);
  for (int m = -l; m <= l; ++m) k += v(m + l) * isto({l, m, 0}, length, Boundary::open);
  Complex sq{};
  for (const auto &[_, c] : k.terms()) sq += c * c;
  const double chi = -0.5 * std::arg(sq);
  k *= std::exp(Complex{0.0, chi});
  OperatorSum h = k.real_part().pruned();
  const double n = h.norm2();
  if (n == 0.0) return h;
  h *= 1.0 / std::sqrt(n);
  // sign: largest coefficient positive
  double big = 0.0;
  for (const auto &[_, c] : h.terms())
    if (std::abs(c.real()) > std::abs(big)) big = c.real();
  if (big < 0.0) h *= -1.0;
  return h;
}

/**
 * Double discrete Fourier transform over (phi, gamma), per-(m, m') least
 * squares over the 8 theta values, PSD projection and principal components.
 */
inline MqcSpectrum extract_correlation(const RotationScan &scan, int l_max = kMqcMaxL) {
  if (l_max < 0 || l_max > kMqcMaxL)
    throw ConfigError("extract_correlation: l_max must lie in [0, 3] for an 8-point grid, got " +
                      std::to_string(l_max));
  if (scan.L == 0) throw ConfigError("extract_correlation: scan has L = 0");
  const double L = static_cast<double>(scan.L);
  MqcSpectrum out;
  out.l_max = l_max;
  out.L = scan.L;
  for (int l = 0; l <= l_max; ++l) out.c_fit.push_back(Eigen::MatrixXcd::Zero(2 * l + 1, 2 * l + 1));

  for (int m = -l_max; m <= l_max; ++m)
    for (int mp = -l_max; mp <= l_max; ++mp) {
      // I_mm'(theta_k) = (1/64) sum e^{i m' phi} I e^{i m gamma}
      Eigen::VectorXd re(kScanPoints), im(kScanPoints);
      for (int it = 0; it < kScanPoints; ++it) {
        Complex acc{};
        for (int ip = 0; ip < kScanPoints; ++ip)
          for (int ig = 0; ig < kScanPoints; ++ig)
            acc += std::exp(Complex{0.0, mp * RotationScan::angle(ip) + m * RotationScan::angle(ig)}) *
                   scan.at(ip, it, ig);
        acc /= static_cast<double>(kScanPoints * kScanPoints);
        re(it) = acc.real();
        im(it) = acc.imag();
      }
      const int l0 = std::max(std::abs(m), std::abs(mp));
      const int n_l = l_max - l0 + 1;
      Eigen::MatrixXd design(kScanPoints, n_l);
      for (int it = 0; it < kScanPoints; ++it)
        for (int l = l0; l <= l_max; ++l) design(it, l - l0) = L * wigner_d(l, m, mp, RotationScan::angle(it));
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
      qr.setThreshold(1e-10);
      if (qr.rank() < n_l)
        throw NumericalError("extract_correlation: theta design matrix is rank deficient for (m, m') = (" +
                             std::to_string(m) + ", " + std::to_string(mp) + ")");
      const Eigen::VectorXd xr = qr.solve(re);
      const Eigen::VectorXd xi = qr.solve(im);
      for (int l = l0; l <= l_max; ++l) out.c_fit[l](m + l, mp + l) = Complex{xr(l - l0), xi(l - l0)};
    }

  // residual of the unprojected model
  double num = 0.0, den = 0.0;
  for (int ip = 0; ip < kScanPoints; ++ip)
    for (int it = 0; it < kScanPoints; ++it)
      for (int ig = 0; ig < kScanPoints; ++ig) {
        const double model = mqc_model_signal(out.c_fit, scan.L, RotationScan::angle(ip),
                                              RotationScan::angle(it), RotationScan::angle(ig));
        const double v = scan.at(ip, it, ig);
        num += (v - model) * (v - model);
        den += v * v;
      }
  out.residual = den > 0.0 ? std::sqrt(num / den) : 0.0;

  struct Eig {
    double lambda;
    int l;
    Eigen::VectorXcd v;
  };
  std::vector<Eig> eigs;
  for (int l = 0; l <= l_max; ++l) {
    out.c.push_back(project_psd(out.c_fit[l]));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(out.c.back());
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
      eigs.push_back({std::max(0.0, es.eigenvalues()(i)), l, es.eigenvectors().col(i)});
  }
  double total = 0.0;
  for (const auto &e : eigs) total += e.lambda;
  if (!(total > 0.0)) throw NumericalError("extract_correlation: correlation matrix is zero");
  std::stable_sort(eigs.begin(), eigs.end(), [](const Eig &a, const Eig &b) { return a.lambda > b.lambda; });
  for (const auto &e : eigs) {
    out.eigenvalues.push_back(e.lambda / total);
    MqcComponent comp;
    comp.l = e.l;
    comp.lambda = e.lambda / total;
    comp.weight = std::sqrt(comp.lambda);
    comp.coefficients = e.v;
    // l = 3 has no explicit operator family here; coefficients only
    comp.op = e.l <= 2 ? component_operator(e.l, e.v) : OperatorSum(2);
    out.components.push_back(std::move(comp));
  }
  return out;
}

// ---------------------------------------------------------------------------
// I/O

inline void write_scan_csv(std::ostream &os, const RotationScan &scan) {
  os << "phi_deg,theta_deg,gamma_deg,signal\n";
  os.precision(17);
  for (int ip = 0; ip < kScanPoints; ++ip)
    for (int it = 0; it < kScanPoints; ++it)
      for (int ig = 0; ig < kScanPoints; ++ig)
        os << ip * kScanStepDeg << ',' << it * kScanStepDeg << ',' << ig * kScanStepDeg << ','
           << scan.at(ip, it, ig) << '\n';
}

/** Reads a full 8 x 8 x 8 grid; L is not stored in the file. */
inline RotationScan read_scan_csv(std::istream &is, std::size_t L) {
  RotationScan scan;
  scan.L = L;
  std::array<bool, kScanPoints * kScanPoints * kScanPoints> seen{};
  std::string line;
  std::size_t lineno = 0;
  auto index = [&](double deg) {
    double r = std::fmod(deg, 360.0);
    if (r < 0) r += 360.0;
    const double k = r / kScanStepDeg;
    const long kr = std::lround(k);
    if (std::abs(k - static_cast<double>(kr)) > 1e-6)
      throw ConfigError("scan CSV line " + std::to_string(lineno) + ": angle " + std::to_string(deg) +
                        " is not on the 45 degree grid");
    return static_cast<int>(kr % kScanPoints);
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' || line.rfind("phi_deg", 0) == 0) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double p, t, g, v;
    if (!(ls >> p >> t >> g >> v))
      throw ConfigError("scan CSV line " + std::to_string(lineno) + ": expected 4 numbers");
    const int ip = index(p), it = index(t), ig = index(g);
    scan.at(ip, it, ig) = v;
    seen[(ip * kScanPoints + it) * kScanPoints + ig] = true;
  }
  for (bool s : seen)
    if (!s) throw ConfigError("scan CSV does not cover the full 8 x 8 x 8 grid");
  return scan;
}

inline nlohmann::json to_json(const MqcSpectrum &s) {
  nlohmann::json j;
  j["l_max"] = s.l_max;
  j["L"] = s.L;
  j["residual"] = s.residual;
  j["eigenvalues"] = s.eigenvalues;
  j["c"] = nlohmann::json::array();
  for (int l = 0; l < static_cast<int>(s.c.size()); ++l) {
    nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
    for (Eigen::Index r = 0; r < s.c[l].rows(); ++r) {
      std::vector<double> rr, ii;
      for (Eigen::Index q = 0; q < s.c[l].cols(); ++q) {
        rr.push_back(s.c[l](r, q).real());
        ii.push_back(s.c[l](r, q).imag());
      }
      re.push_back(rr);
      im.push_back(ii);
    }
    j["c"].push_back({{"l", l}, {"real", re}, {"imag", im}});
  }
  j["components"] = nlohmann::json::array();
  for (const auto &c : s.components)
    j["components"].push_back(
        {{"l", c.l}, {"lambda", c.lambda}, {"weight", c.weight}, {"operator", to_text(c.op)}});
  return j;
}

}  // namespace spinhydro
