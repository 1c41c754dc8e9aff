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

// Dense 2^L x 2^L helpers for small chains: matrix construction from Pauli
// sums, Hermitian exponentials, collective pulses and the inverse Pauli
// decomposition. Basis bit j is site j, bit value 0 is spin up.

#include <Eigen/Dense>

#include <bit>
#include <cstdint>
#include <string>

#include "spinhydro/errors.hpp"
#include "spinhydro/operators.hpp"

namespace spinhydro {

inline constexpr std::size_t kDenseMaxSites = 12;

using DenseMatrix = Eigen::MatrixXcd;

struct PauliMasks {
  std::uint64_t x = 0;  // sites carrying X or Y (bit flips)
  std::uint64_t z = 0;  // sites carrying Y or Z (sign)
  int n_y = 0;
};

inline PauliMasks pauli_masks(const PauliString &s) {
  PauliMasks m;
  for (const auto &f : s.factors()) {
    if (f.site >= 64) throw SizeLimitError("bit-mask form needs sites < 64");
    const std::uint64_t bit = std::uint64_t{1} << f.site;
    if (f.axis == Pauli::X || f.axis == Pauli::Y) m.x |= bit;
    if (f.axis == Pauli::Y || f.axis == Pauli::Z) m.z |= bit;
    if (f.axis == Pauli::Y) ++m.n_y;
  }
  return m;
}

inline void check_dense_size(std::size_t length, std::size_t limit = kDenseMaxSites) {
  if (length > limit)
    throw SizeLimitError("dense method limited to L <= " + std::to_string(limit) +
                         ", got L = " + std::to_string(length));
}

/** Explicit matrix of an operator; <s ^ x| P |s> = i^{nY} (-1)^{|s & z|}. */
inline DenseMatrix to_dense(const OperatorSum &op, std::size_t limit = kDenseMaxSites) {
  check_dense_size(op.length(), limit);
  const std::size_t dim = std::size_t{1} << op.length();
  DenseMatrix m = DenseMatrix::Zero(dim, dim);
  for (const auto &[str, c] : op.terms()) {
    const auto pm = pauli_masks(str);
    const Complex phase = c * detail::i_power(pm.n_y);
    for (std::size_t s = 0; s < dim; ++s) {
      const bool odd = std::popcount(s & pm.z) & 1;
      m(s ^ pm.x, s) += odd ? -phase : phase;
    }
  }
  return m;
}

/** Tr(M sigma_s)/2^L for every string, via one Walsh transform per flip mask. */
inline OperatorSum pauli_decompose(const DenseMatrix &m, std::size_t length,
                                   double cutoff = kPruneCutoff) {
  check_dense_size(length);
  const std::size_t dim = std::size_t{1} << length;
  if (static_cast<std::size_t>(m.rows()) != dim || static_cast<std::size_t>(m.cols()) != dim)
    throw ConfigError("pauli_decompose: matrix size does not match L");
  OperatorSum out(length);
  std::vector<Complex> f(dim);
  for (std::size_t x = 0; x < dim; ++x) {
    for (std::size_t s = 0; s < dim; ++s) f[s] = m(s, s ^ x);
    for (std::size_t h = 1; h < dim; h <<= 1)
      for (std::size_t i = 0; i < dim; i += 2 * h)
        for (std::size_t k = i; k < i + h; ++k) {
          const Complex a = f[k];
          const Complex b = f[k + h];
          f[k] = a + b;
          f[k + h] = a - b;
        }
    for (std::size_t z = 0; z < dim; ++z) {
      const Complex v = f[z] * detail::i_power(std::popcount(x & z)) / static_cast<double>(dim);
      if (std::abs(v) < cutoff) continue;
      std::vector<SitePauli> factors;
      for (std::uint32_t j = 0; j < length; ++j) {
        const bool bx = (x >> j) & 1;
        const bool bz = (z >> j) & 1;
        if (!bx && !bz) continue;
        factors.push_back({j, bx ? (bz ? Pauli::Y : Pauli::X) : Pauli::Z});
      }
      out.add_term(PauliStringBuilder::adopt(std::move(factors)), v);
    }
  }
  return out;
}

/** exp(-i H t) for Hermitian H. */
inline DenseMatrix expm_hermitian(const DenseMatrix &h, double t) {
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const Eigen::VectorXcd phases =
      (es.eigenvalues().array() * Complex{0.0, -t}).exp().matrix();
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

/** 2x2 matrix of exp(-i angle n.S). */
inline Eigen::Matrix2cd spin_half_rotation(Vec3 n, double angle) {
  const double norm = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
  if (norm == 0.0) throw ConfigError("rotation axis must be non-zero");
  for (auto &x : n) x /= norm;
  const double c = std::cos(angle / 2);
  const double s = std::sin(angle / 2);
  Eigen::Matrix2cd u;
  // cos - i sin (n.sigma)
  u(0, 0) = Complex{c, -s * n[2]};
  u(1, 1) = Complex{c, s * n[2]};
  u(0, 1) = Complex{-s * n[1], -s * n[0]};
  u(1, 0) = Complex{s * n[1], -s * n[0]};
  return u;
}

/** Left-multiplies m by the collective product of u on every site. */
inline void apply_collective_left(DenseMatrix &m, const Eigen::Matrix2cd &u, std::size_t length) {
  const std::size_t dim = std::size_t{1} << length;
  for (std::size_t j = 0; j < length; ++j) {
    const std::size_t bit = std::size_t{1} << j;
    for (std::size_t s = 0; s < dim; ++s) {
      if (s & bit) continue;
      const std::size_t t = s | bit;
      for (Eigen::Index col = 0; col < m.cols(); ++col) {
        const Complex a = m(s, col);
        const Complex b = m(t, col);
        m(s, col) = u(0, 0) * a + u(0, 1) * b;
        m(t, col) = u(1, 0) * a + u(1, 1) * b;
      }
    }
  }
}

/** Dense collective rotation exp(-i angle n.S_total). */
inline DenseMatrix collective_rotation(Vec3 n, double angle, std::size_t length) {
  check_dense_size(length);
  const std::size_t dim = std::size_t{1} << length;
  DenseMatrix m = DenseMatrix::Identity(dim, dim);
  apply_collective_left(m, spin_half_rotation(n, angle), length);
  return m;
}

/** Tr(a b)/2^L for dense matrices. */
inline Complex dense_trace_product(const DenseMatrix &a, const DenseMatrix &b) {
  return (a.transpose().cwiseProduct(b)).sum() / static_cast<double>(a.rows());
}

}  // namespace spinhydro
