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

#include <stdexcept>
#include <string>

namespace spinhydro {

/** Invalid user input: bad configuration, mismatched sizes, malformed files. */
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/** A problem too large for the requested method (dense limits etc). */
class SizeLimitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/** A requested construction that cannot be realized (negative delays, l > 2 ...). */
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/** Numerical failure: fits on non-positive data, rank deficiency, non-convergence. */
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spinhydro
