// Copyright 2026 The ppgpr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ppgpr {

// Validation failures use std::invalid_argument. Failures while a protocol
// is executing (missing or reused messages, non-finite gradients) use these.

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// z_{i,2}(T) ≤ 0: consensus has not come close enough to the average.
class ConvergenceError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

/// K + σ²I stayed numerically indefinite after the largest jitter.
class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Strict mode refused a modulus below the wrap-around bound.
class ModulusTooSmall : public std::invalid_argument {
 public:
  ModulusTooSmall(std::int64_t q, std::int64_t required)
      : std::invalid_argument("modulus q=" + std::to_string(q) +
                              " is below the required q_min=" +
                              std::to_string(required)),
        q_(q),
        required_(required) {}

  std::int64_t modulus() const { return q_; }
  std::int64_t required() const { return required_; }

 private:
  std::int64_t q_;
  std::int64_t required_;
};

}  // namespace ppgpr
