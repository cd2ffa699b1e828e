// Copyright 2026 The mtvrp Authors
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

namespace mtvrp {

// Each error class maps to one CLI exit code (see cli.hpp).

/// Bad arguments or conflicting options.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Infeasible input, malformed instance/solution, or a constraint violation
/// detected on user data.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable, unwritable, or corrupt files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal invariant broke (dead-end mask, masked action selected, ...).
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace mtvrp
