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

#include <iosfwd>
#include <string>
#include <vector>

namespace mtvrp {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitValidation = 3,
  kExitIo = 4,
  kExitInternal = 5,
};

/// Runs one subcommand (generate, train, finetune, solve, bench, inspect).
/// `args` excludes the program name. Data goes to files or `out`, logs and
/// errors to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv);

}  // namespace mtvrp
