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

/**
 * Pauli-string operator algebra on a chain of L spin-1/2 sites.
 *
 * Operators are stored in the Pauli basis sigma = 2 S, so that every string
 * has Tr(sigma_s^2) = 2^L and normalized traces reduce to coefficient dot
 * products. Nothing of size 2^L is ever built here.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <compare>
#include <cstdint>
#include <iomanip>
#include <map>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spinhydro/errors.hpp"

namespace spinhydro {

using Complex = std::complex<double>;

/** Coefficients with magnitude below this are dropped after arithmetic. */
inline constexpr double kPruneCutoff = 1e-14;

enum class Pauli : std::uint8_t { I = 0, X = 1, Y = 2, Z = 3 };

enum class Boundary { open, periodic };

inline char pauli_char(Pauli p) {
  constexpr std::array<char, 4> names{'I', 'X', 'Y', 'Z'};
  return names[static_cast<int>(p)];
}

struct SitePauli {
  std::uint32_t site = 0;
  Pauli axis = Pauli::X;

  auto operator<=>(const SitePauli &) const = default;
};

/** Tensor product of single-site Paulis; identity is the empty string. */
class PauliString {
 public:
  PauliString() = default;

  explicit PauliString(std::vector<SitePauli> factors)
      : factors_(std::move(factors)) {
    for (std::size_t k = 0; k < factors_.size(); ++k) {
      if (factors_[k].axis == Pauli::I)
        throw ConfigError("PauliString: identity factors are implicit");
      if (k > 0 && factors_[k].site <= factors_[k - 1].site)
        throw ConfigError("PauliString: sites must be strictly increasing");
    }
  }

  static PauliString single(std::uint32_t site, Pauli axis) {
    if (axis == Pauli::I) return PauliString{};
    return PauliString(std::vector<SitePauli>{{site, axis}});
  }

  static PauliString pair(std::uint32_t j, Pauli a, std::uint32_t k, Pauli b) {
    if (j == k) throw ConfigError("PauliString::pair: sites must differ");
    if (j > k) {
      std::swap(j, k);
      std::swap(a, b);
    }
    std::vector<SitePauli> f;
    if (a != Pauli::I) f.push_back({j, a});
    if (b != Pauli::I) f.push_back({k, b});
    return PauliString(std::move(f));
  }

  std::span<const SitePauli> factors() const { return factors_; }
  bool is_identity() const { return factors_.empty(); }
  std::size_t weight() const { return factors_.size(); }

  Pauli at(std::uint32_t site) const {
    for (const auto &f : factors_)
      if (f.site == site) return f.axis;
    return Pauli::I;
  }

  std::string str() const {
    if (factors_.empty()) return "I";
    std::string out;
    for (const auto &f : factors_) {
      if (!out.empty()) out.push_back(' ');
      out.push_back(pauli_char(f.axis));
      out += std::to_string(f.site);
    }
    return out;
  }

  auto operator<=>(const PauliString &) const = default;

 private:
  friend class PauliStringBuilder;
  std::vector<SitePauli> factors_;
};

/** Unchecked construction for internal algorithms that already keep order. */
class PauliStringBuilder {
 public:
  static PauliString adopt(std::vector<SitePauli> factors) {
    PauliString s;
    s.factors_ = std::move(factors);
    return s;
  }
};

namespace detail {

// sigma_a sigma_b = delta_ab + i eps_abc sigma_c; returns (i-power, c)
inline std::pair<int, Pauli> site_product(Pauli a, Pauli b) {
  if (a == Pauli::I) return {0, b};
  if (b == Pauli::I) return {0, a};
  if (a == b) return {0, Pauli::I};
  const int ia = static_cast<int>(a);
  const int ib = static_cast<int>(b);
  const auto c = static_cast<Pauli>(6 - ia - ib);
  const bool cyclic = (ib - ia + 3) % 3 == 1;
  return {cyclic ? 1 : 3, c};
}

inline Complex i_power(int k) {
  switch (((k % 4) + 4) % 4) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

}  // namespace detail

/** Product of two strings: a*b = i^phase * string. */
struct PhasedString {
  int phase = 0;
  PauliString string;
};

inline PhasedString multiply(const PauliString &a, const PauliString &b) {
  const auto fa = a.factors();
  const auto fb = b.factors();
  std::vector<SitePauli> out;
  out.reserve(fa.size() + fb.size());
  int phase = 0;
  std::size_t i = 0;
  std::size_t k = 0;
  while (i < fa.size() || k < fb.size()) {
    if (k == fb.size() || (i < fa.size() && fa[i].site < fb[k].site)) {
      out.push_back(fa[i++]);
    } else if (i == fa.size() || fb[k].site < fa[i].site) {
      out.push_back(fb[k++]);
    } else {
      auto [p, c] = detail::site_product(fa[i].axis, fb[k].axis);
      phase += p;
      if (c != Pauli::I) out.push_back({fa[i].site, c});
      ++i;
      ++k;
    }
  }
  return {phase % 4, PauliStringBuilder::adopt(std::move(out))};
}

/** Sparse weighted sum of Pauli strings on a chain of fixed length. */
class OperatorSum {
 public:
  using TermMap = std::map<PauliString, Complex>;

  OperatorSum() = default;
  explicit OperatorSum(std::size_t length) : length_(length) {}

  static OperatorSum identity(std::size_t length, Complex c = 1.0) {
    OperatorSum op(length);
    op.add_term(PauliString{}, c);
    return op;
  }

  std::size_t length() const { return length_; }
  const TermMap &terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }

  void add_term(const PauliString &s, Complex c) {
    if (!s.factors().empty() && s.factors().back().site >= length_)
      throw ConfigError("OperatorSum: site " +
                        std::to_string(s.factors().back().site) +
                        " outside chain of length " + std::to_string(length_));
    if (c == Complex{}) return;
    auto [it, inserted] = terms_.try_emplace(s, c);
    if (!inserted) {
      it->second += c;
      if (std::abs(it->second) == 0.0) terms_.erase(it);
    }
  }

  Complex coefficient(const PauliString &s) const {
    auto it = terms_.find(s);
    return it == terms_.end() ? Complex{} : it->second;
  }

  /** Identity coefficient, i.e. Tr(A)/2^L. */
  Complex normalized_trace() const { return coefficient(PauliString{}); }

  /** Tr(A^dagger A)/2^L. */
  double norm2() const {
    double s = 0.0;
    for (const auto &[_, c] : terms_) s += std::norm(c);
    return s;
  }

  OperatorSum pruned(double cutoff = kPruneCutoff) const {
    OperatorSum out(length_);
    for (const auto &[s, c] : terms_)
      if (std::abs(c) >= cutoff) out.terms_.emplace_hint(out.terms_.end(), s, c);
    return out;
  }

  OperatorSum adjoint() const {
    OperatorSum out(length_);
    for (const auto &[s, c] : terms_)
      out.terms_.emplace_hint(out.terms_.end(), s, std::conj(c));
    return out;
  }

  bool is_hermitian(double tol = 1e-12) const {
    for (const auto &[_, c] : terms_)
      if (std::abs(c.imag()) > tol) return false;
    return true;
  }

  /** Drops imaginary parts; meant for operators known to be Hermitian. */
  OperatorSum real_part() const {
    OperatorSum out(length_);
    for (const auto &[s, c] : terms_)
      if (c.real() != 0.0)
        out.terms_.emplace_hint(out.terms_.end(), s, Complex{c.real(), 0.0});
    return out;
  }

  OperatorSum &operator+=(const OperatorSum &o) {
    check_length(o);
    for (const auto &[s, c] : o.terms_) add_term(s, c);
    return *this;
  }
  OperatorSum &operator-=(const OperatorSum &o) {
    check_length(o);
    for (const auto &[s, c] : o.terms_) add_term(s, -c);
    return *this;
  }
  OperatorSum &operator*=(Complex k) {
    if (k == Complex{}) {
      terms_.clear();
      return *this;
    }
    for (auto &[_, c] : terms_) c *= k;
    return *this;
  }

  friend OperatorSum operator+(OperatorSum a, const OperatorSum &b) { return a += b; }
  friend OperatorSum operator-(OperatorSum a, const OperatorSum &b) { return a -= b; }
  friend OperatorSum operator*(OperatorSum a, Complex k) { return a *= k; }
  friend OperatorSum operator*(Complex k, OperatorSum a) { return a *= k; }
  friend OperatorSum operator*(OperatorSum a, double k) { return a *= Complex{k, 0.0}; }
  friend OperatorSum operator*(double k, OperatorSum a) { return a *= Complex{k, 0.0}; }
  friend OperatorSum operator-(OperatorSum a) { return a *= Complex{-1.0, 0.0}; }

  friend bool operator==(const OperatorSum &, const OperatorSum &) = default;

  void check_length(const OperatorSum &o) const {
    if (o.length_ != length_)
      throw ConfigError("operator length mismatch: " + std::to_string(length_) +
                        " vs " + std::to_string(o.length_));
  }

 private:
  std::size_t length_ = 0;
  TermMap terms_;
};

/** Exact product a*b, pruned at kPruneCutoff. */
inline OperatorSum multiply(const OperatorSum &a, const OperatorSum &b) {
  a.check_length(b);
  OperatorSum out(a.length());
  for (const auto &[sa, ca] : a.terms())
    for (const auto &[sb, cb] : b.terms()) {
      auto prod = multiply(sa, sb);
      out.add_term(prod.string, ca * cb * detail::i_power(prod.phase));
    }
  return out.pruned();
}

inline OperatorSum operator*(const OperatorSum &a, const OperatorSum &b) {
  return multiply(a, b);
}

/** [a, b] computed string-pairwise: commuting pairs are skipped. */
inline OperatorSum commutator(const OperatorSum &a, const OperatorSum &b) {
  a.check_length(b);
  OperatorSum out(a.length());
  for (const auto &[sa, ca] : a.terms())
    for (const auto &[sb, cb] : b.terms()) {
      auto ab = multiply(sa, sb);
      // strings either commute (phase even) or anticommute (phase odd)
      if (ab.phase % 2 == 0) continue;
      out.add_term(ab.string, 2.0 * ca * cb * detail::i_power(ab.phase));
    }
  return out.pruned();
}

/** Tr(a b)/2^L via trace orthogonality of Pauli strings. */
inline Complex trace_product(const OperatorSum &a, const OperatorSum &b) {
  a.check_length(b);
  const auto &small = a.size() <= b.size() ? a : b;
  const auto &large = a.size() <= b.size() ? b : a;
  Complex s{};
  for (const auto &[str, c] : small.terms()) {
    auto it = large.terms().find(str);
    if (it != large.terms().end()) s += c * it->second;
  }
  return s;
}

/** Real part of Tr(a b)/2^L; exact for Hermitian a and b. */
inline double normalized_trace_product(const OperatorSum &a, const OperatorSum &b) {
  return trace_product(a, b).real();
}

/** Tr(a b)/sqrt(Tr(a a) Tr(b b)) for Hermitian a, b; lies in [-1, 1]. */
inline double overlap(const OperatorSum &a, const OperatorSum &b) {
  const double na = a.norm2();
  const double nb = b.norm2();
  if (na == 0.0 || nb == 0.0) throw ConfigError("overlap: zero-norm operator");
  return normalized_trace_product(a, b) / std::sqrt(na * nb);
}

// ---------------------------------------------------------------------------
// Elementary operators

inline OperatorSum sigma(std::size_t length, std::uint32_t site, Pauli axis) {
  OperatorSum op(length);
  op.add_term(PauliString::single(site, axis), 1.0);
  return op;
}

/** Spin operator S_axis = sigma_axis / 2. */
inline OperatorSum spin(std::size_t length, std::uint32_t site, Pauli axis) {
  OperatorSum op(length);
  op.add_term(PauliString::single(site, axis), 0.5);
  return op;
}

/** S_a^j S_b^k = sigma sigma / 4. */
inline OperatorSum spin_pair(std::size_t length, std::uint32_t j, Pauli a,
                             std::uint32_t k, Pauli b) {
  OperatorSum op(length);
  op.add_term(PauliString::pair(j, a, k, b), 0.25);
  return op;
}

/** Collective spin sum_j S_axis^j. */
inline OperatorSum collective_spin(std::size_t length, Pauli axis) {
  OperatorSum op(length);
  for (std::uint32_t j = 0; j < length; ++j)
    op.add_term(PauliString::single(j, axis), 0.5);
  return op;
}

/** sum_j (-1)^j S_z^j, conserved by the nearest-neighbour double-quantum model. */
inline OperatorSum staggered_spin_z(std::size_t length) {
  OperatorSum op(length);
  for (std::uint32_t j = 0; j < length; ++j)
    op.add_term(PauliString::single(j, Pauli::Z), j % 2 == 0 ? 0.5 : -0.5);
  return op;
}

// ---------------------------------------------------------------------------
// Collective rotations

using Vec3 = std::array<double, 3>;

/**
 * Single-site conjugation map: U sigma_a U^dagger = sum_b m[b][a] sigma_b,
 * indices 0,1,2 for x,y,z. Identical on every site for collective rotations.
 */
struct SiteRotation {
  std::array<std::array<double, 3>, 3> m{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

  static SiteRotation identity() { return {}; }

  /** U = exp(-i angle n.S) with n normalized internally (Rodrigues). */
  static SiteRotation about(Vec3 n, double angle) {
    const double norm = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
    if (norm == 0.0) throw ConfigError("rotation axis must be non-zero");
    for (auto &x : n) x /= norm;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    SiteRotation r;
    for (int b = 0; b < 3; ++b)
      for (int a = 0; a < 3; ++a) {
        double v = (a == b ? c : 0.0) + (1.0 - c) * n[b] * n[a];
        // (n x e_a)_b = eps_{b k a} n_k
        const int k = 3 - a - b;
        if (a != b) {
          const double eps = ((b - a + 3) % 3 == 1) ? 1.0 : -1.0;  // eps_{b,k,a}
          v += s * eps * n[k];
        }
        r.m[b][a] = v;
      }
    return r;
  }

  /** Composition: (this after first), i.e. conjugate by `first` then by this. */
  SiteRotation after(const SiteRotation &first) const {
    SiteRotation r;
    for (int b = 0; b < 3; ++b)
      for (int a = 0; a < 3; ++a) {
        double v = 0.0;
        for (int k = 0; k < 3; ++k) v += m[b][k] * first.m[k][a];
        r.m[b][a] = v;
      }
    return r;
  }

  /** Map for U^dagger sigma U. */
  SiteRotation inverse() const {
    SiteRotation r;
    for (int b = 0; b < 3; ++b)
      for (int a = 0; a < 3; ++a) r.m[b][a] = m[a][b];
    return r;
  }

  bool is_identity(double tol = 1e-12) const {
    for (int b = 0; b < 3; ++b)
      for (int a = 0; a < 3; ++a)
        if (std::abs(m[b][a] - (a == b ? 1.0 : 0.0)) > tol) return false;
    return true;
  }
};

/** U A U^dagger for a collective rotation U described by its site map. */
inline OperatorSum conjugate(const OperatorSum &op, const SiteRotation &rot) {
  OperatorSum out(op.length());
  std::vector<std::pair<std::vector<SitePauli>, Complex>> partial;
  std::vector<std::pair<std::vector<SitePauli>, Complex>> next;
  for (const auto &[str, coeff] : op.terms()) {
    partial.clear();
    partial.emplace_back(std::vector<SitePauli>{}, coeff);
    for (const auto &f : str.factors()) {
      next.clear();
      const int a = static_cast<int>(f.axis) - 1;
      for (int b = 0; b < 3; ++b) {
        const double w = rot.m[b][a];
        if (std::abs(w) < 1e-15) continue;
        for (const auto &[fac, c] : partial) {
          auto nf = fac;
          nf.push_back({f.site, static_cast<Pauli>(b + 1)});
          next.emplace_back(std::move(nf), c * w);
        }
      }
      std::swap(partial, next);
    }
    for (auto &[fac, c] : partial)
      out.add_term(PauliStringBuilder::adopt(std::move(fac)), c);
  }
  return out.pruned();
}

/** Site map of U(phi,theta,gamma) = e^{-i phi Z} e^{-i theta Y} e^{-i gamma Z}. */
inline SiteRotation euler_zyz(double phi, double theta, double gamma) {
  const auto rz1 = SiteRotation::about({0, 0, 1}, gamma);
  const auto ry = SiteRotation::about({0, 1, 0}, theta);
  const auto rz2 = SiteRotation::about({0, 0, 1}, phi);
  return rz2.after(ry.after(rz1));
}

/** U(phi,theta,gamma) A U(phi,theta,gamma)^dagger. */
inline OperatorSum rotate_collective(const OperatorSum &op, double phi,
                                     double theta, double gamma) {
  return conjugate(op, euler_zyz(phi, theta, gamma));
}

// ---------------------------------------------------------------------------
// Irreducible spherical tensor operators, shortest-correlation-length family

struct IstoLabel {
  int l = 0;
  int m = 0;
  std::uint32_t site = 0;
};

namespace detail {

// (sigma_x +/- i sigma_y)/sqrt(2), unit normalized trace norm
inline std::array<std::pair<Pauli, Complex>, 2> sigma_pm(int sign) {
  const double r = 1.0 / std::numbers::sqrt2;
  return {{{Pauli::X, Complex{r, 0.0}}, {Pauli::Y, Complex{0.0, sign * r}}}};
}

inline void add_pair_product(OperatorSum &op, std::uint32_t j, std::uint32_t k,
                             std::span<const std::pair<Pauli, Complex>> a,
                             std::span<const std::pair<Pauli, Complex>> b,
                             Complex scale) {
  for (const auto &[pa, ca] : a)
    for (const auto &[pb, cb] : b)
      op.add_term(PauliString::pair(j, pa, k, pb), scale * ca * cb);
}

}  // namespace detail

/**
 * T_lm on site j (l = 1) or on the bond (j, j+1) (l = 2), normalized so that
 * Tr(T T^dagger) = 2^L. Negative m follows T_{l,-m} = (-1)^m T_lm^dagger.
 */
inline OperatorSum isto(const IstoLabel &label, std::size_t length,
                        Boundary boundary = Boundary::periodic) {
  const int l = label.l;
  const int m = label.m;
  if (l < 0 || std::abs(m) > l) throw ConfigError("isto: require |m| <= l");
  if (l > 2)
    throw InfeasibleError("isto: l = " + std::to_string(l) +
                          " is not supported (only l <= 2 are constructed)");
  if (label.site >= length) throw ConfigError("isto: site outside chain");
  if (m < 0) {
    auto pos = isto({l, -m, label.site}, length, boundary).adjoint();
    return (m % 2 == 0) ? pos : -pos;
  }
  const std::uint32_t j = label.site;
  OperatorSum op(length);
  if (l == 0) return OperatorSum::identity(length);
  if (l == 1) {
    if (m == 0) return sigma(length, j, Pauli::Z);
    for (const auto &[p, c] : detail::sigma_pm(+1))
      op.add_term(PauliString::single(j, p), c);
    return op;
  }
  if (length < 2) throw ConfigError("isto: l = 2 needs two sites");
  std::uint32_t k = j + 1;
  if (k == length) {
    if (boundary == Boundary::open)
      throw ConfigError("isto: bond (L-1, L) does not exist on an open chain");
    k = 0;
  }
  const std::array<std::pair<Pauli, Complex>, 1> z{{{Pauli::Z, 1.0}}};
  const auto plus = detail::sigma_pm(+1);
  switch (m) {
    case 0: {
      const double r = 1.0 / std::sqrt(6.0);
      op.add_term(PauliString::pair(j, Pauli::Z, k, Pauli::Z), 2.0 * r);
      op.add_term(PauliString::pair(j, Pauli::X, k, Pauli::X), -r);
      op.add_term(PauliString::pair(j, Pauli::Y, k, Pauli::Y), -r);
      break;
    }
    case 1: {
      const double r = 1.0 / std::numbers::sqrt2;
      detail::add_pair_product(op, j, k, z, plus, r);
      detail::add_pair_product(op, j, k, plus, z, r);
      break;
    }
    default:
      detail::add_pair_product(op, j, k, plus, plus, 1.0);
      break;
  }
  return op.pruned();
}

// ---------------------------------------------------------------------------
// Text form: "coeff * X0 Y3 Z5", one term per line

namespace detail {

inline std::string format_coefficient(Complex c) {
  std::ostringstream os;
  os << std::setprecision(17);
  if (c.imag() == 0.0)
    os << c.real();
  else
    os << '(' << c.real() << ',' << c.imag() << ')';
  return os.str();
}

}  // namespace detail

inline std::string to_text(const OperatorSum &op) {
  std::string out;
  for (const auto &[s, c] : op.terms()) {
    out += detail::format_coefficient(c);
    out += " * ";
    out += s.str();
    out += '\n';
  }
  return out;
}

inline OperatorSum parse_operator(std::string_view text, std::size_t length) {
  OperatorSum op(length);
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto star = line.find('*');
    if (star == std::string::npos)
      throw ConfigError("operator text line " + std::to_string(lineno) +
                        ": expected 'coeff * string'");
    std::istringstream cs(line.substr(0, star));
    Complex c;
    std::string tok;
    cs >> tok;
    if (!tok.empty() && tok.front() == '(') {
      std::istringstream ps(tok);
      ps >> c;
      if (!ps) throw ConfigError("bad complex coefficient on line " + std::to_string(lineno));
    } else {
      try {
        c = std::stod(tok);
      } catch (const std::exception &) {
        throw ConfigError("bad coefficient on line " + std::to_string(lineno));
      }
    }
    std::istringstream ss(line.substr(star + 1));
    std::vector<SitePauli> factors;
    while (ss >> tok) {
      if (tok == "I") continue;
      Pauli p;
      switch (tok[0]) {
        case 'X': p = Pauli::X; break;
        case 'Y': p = Pauli::Y; break;
        case 'Z': p = Pauli::Z; break;
        default:
          throw ConfigError("bad Pauli token '" + tok + "' on line " + std::to_string(lineno));
      }
      const auto site = static_cast<std::uint32_t>(std::stoul(tok.substr(1)));
      factors.push_back({site, p});
    }
    std::sort(factors.begin(), factors.end());
    op.add_term(PauliString(std::move(factors)), c);
  }
  return op;
}

}  // namespace spinhydro
