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

// Independent reference implementations used by the unit tests.

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "spinhydro/operators.hpp"

namespace oracle {

using Complex = std::complex<double>;
using Mat = Eigen::MatrixXcd;

/** 2x2 Pauli matrices in the basis (|up>, |down>), up = bit 0. */
inline Eigen::Matrix2cd pauli(spinhydro::Pauli p) {
  Eigen::Matrix2cd m;
  switch (p) {
    case spinhydro::Pauli::X: m << 0, 1, 1, 0; break;
    case spinhydro::Pauli::Y: m << 0, Complex(0, -1), Complex(0, 1), 0; break;
    case spinhydro::Pauli::Z: m << 1, 0, 0, -1; break;
    default: m.setIdentity(); break;
  }
  return m;
}

/** Kronecker product with site 0 as the least significant bit. */
inline Mat kron_string(const spinhydro::PauliString &s, std::size_t L) {
  Mat out = Mat::Identity(1, 1);
  for (std::size_t site = L; site-- > 0;) {
    const Eigen::Matrix2cd p = pauli(s.at(static_cast<std::uint32_t>(site)));
    Mat next(out.rows() * 2, out.cols() * 2);
    for (Eigen::Index r = 0; r < out.rows(); ++r)
      for (Eigen::Index c = 0; c < out.cols(); ++c)
        next.block(2 * r, 2 * c, 2, 2) = out(r, c) * p;
    out = next;
  }
  return out;
}

inline Mat dense(const spinhydro::OperatorSum &op) {
  const std::size_t L = op.length();
  const Eigen::Index dim = Eigen::Index{1} << L;
  Mat m = Mat::Zero(dim, dim);
  for (const auto &[s, c] : op.terms()) m += c * kron_string(s, L);
  return m;
}

/** Dense 2x2 exp(-i angle n.sigma/2) via its closed form. */
inline Eigen::Matrix2cd su2(const std::array<double, 3> &n_in, double angle) {
  const double nn = std::sqrt(n_in[0] * n_in[0] + n_in[1] * n_in[1] + n_in[2] * n_in[2]);
  const std::array<double, 3> n{n_in[0] / nn, n_in[1] / nn, n_in[2] / nn};
  Eigen::Matrix2cd ns = n[0] * pauli(spinhydro::Pauli::X) + n[1] * pauli(spinhydro::Pauli::Y) +
                        n[2] * pauli(spinhydro::Pauli::Z);
  return std::cos(angle / 2) * Eigen::Matrix2cd::Identity() - Complex(0, std::sin(angle / 2)) * ns;
}

/** Product of the same single-site unitary on every site. */
inline Mat collective(const Eigen::Matrix2cd &u, std::size_t L) {
  Mat out = Mat::Identity(1, 1);
  for (std::size_t site = 0; site < L; ++site) {
    Mat next(out.rows() * 2, out.cols() * 2);
    for (Eigen::Index r = 0; r < 2; ++r)
      for (Eigen::Index c = 0; c < 2; ++c)
        next.block(r * out.rows(), c * out.cols(), out.rows(), out.cols()) = u(r, c) * out;
    out = next;
  }
  return out;
}

/** Random operator with n_terms Pauli strings and complex (or real) coefficients. */
inline spinhydro::OperatorSum random_operator(std::size_t L, std::size_t n_terms, std::mt19937_64 &rng,
                                              bool hermitian = false) {
  std::uniform_int_distribution<int> axis(0, 3);
  std::normal_distribution<double> g;
  spinhydro::OperatorSum op(L);
  for (std::size_t t = 0; t < n_terms; ++t) {
    std::vector<spinhydro::SitePauli> f;
    for (std::uint32_t s = 0; s < L; ++s) {
      const int a = axis(rng);
      if (a != 0) f.push_back({s, static_cast<spinhydro::Pauli>(a)});
    }
    const Complex c = hermitian ? Complex(g(rng), 0.0) : Complex(g(rng), g(rng));
    op.add_term(spinhydro::PauliString(std::move(f)), c);
  }
  return op;
}

inline double max_abs(const Mat &m) { return m.cwiseAbs().maxCoeff(); }

/** Full expm for a Hermitian matrix via its eigendecomposition: exp(-i h t). */
inline Mat expm_herm(const Mat &h, double t) {
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  const Eigen::VectorXcd ph = (es.eigenvalues().cast<Complex>() * Complex(0, -t)).array().exp();
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace oracle
