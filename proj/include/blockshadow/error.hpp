// Copyright 2026 The blockshadow Authors
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

namespace blockshadow {

/// Operand sizes disagree (qubit counts, block sizes, layouts).
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Precondition on a value failed (bad probabilities, k not dividing n, ...).
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Request is well formed but outside what the library supports.
struct UnsupportedError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Numerical procedure failed to produce a usable answer.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, datasets).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require_dims(bool ok, const std::string &what) {
    if (!ok) throw DimensionError(what);
}

}  // namespace blockshadow
