// Copyright 2026 The seqreward Authors. All rights reserved.
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

#ifndef SEQREWARD_ERRORS_H_
#define SEQREWARD_ERRORS_H_

#include <stdexcept>
#include <string>

namespace seqreward {

// Malformed caller input (out-of-range index, invalid triple).
class InvalidInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A precondition of an operation was violated (shape mismatch, stepping a
// finished episode).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Numerical failure during optimization (NaN loss or gradient, collapse).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent configuration, including artifact hash mismatches.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace seqreward

#endif  // SEQREWARD_ERRORS_H_
