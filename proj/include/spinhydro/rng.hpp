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

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <vector>

namespace spinhydro {

/**
 * Reproducible random stream keyed by (seed, stream ids...).
 *
 * The engine and the seed_seq mixing are fully specified by the standard; the
 * distribution transforms below are written out so draws are identical
 * across standard library implementations.
 */
class Rng {
 public:
  Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> streams = {}) {
    std::vector<std::uint32_t> words;
    auto push = [&](std::uint64_t v) {
      words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
      words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(seed);
    for (auto s : streams) push(s);
    std::seed_seq seq(words.begin(), words.end());
    engine_.seed(seq);
  }

  std::uint64_t bits() { return engine_(); }

  /** Uniform on [0, 1). */
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /** Uniform on (0, 1]. */
  double uniform_open0() { return 1.0 - uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_open0()));
    const double phi = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
  }

  /** +1 or -1 with equal probability. */
  int sign() { return (engine_() >> 63) ? 1 : -1; }

  /** Index drawn from unnormalized non-negative weights. */
  std::size_t categorical(const std::vector<double> &weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double x = uniform() * total;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (x < weights[k]) return k;
      x -= weights[k];
    }
    return weights.size() - 1;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace spinhydro
