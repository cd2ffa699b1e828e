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

#include <filesystem>
#include <string>

#include "json.hpp"
#include "mtvrp/core.hpp"

namespace mtvrp {

using Json = nlohmann::ordered_json;

/// Instance <-> JSON with a fixed field order:
/// {name, n, attrs:{tw,open,backhaul,limit}, coords, demands, tw_early, tw_late,
///  service, capacity, duration_limit, depot_horizon, speed, seed}.
/// Time-window fields are omitted when TW is inactive, duration_limit when L is.
Json instance_to_json(const Instance& instance);
Instance instance_from_json(const Json& json);

std::string instance_to_string(const Instance& instance);

void write_instance(const Instance& instance, const std::filesystem::path& path);
/// Reads and validates an instance file. Throws IoError or ValidationError.
Instance read_instance(const std::filesystem::path& path);

struct SolutionRecord {
  Solution solution;
  double cost = 0.0;
  std::string variant;
  double wall_ms = 0.0;
};

/// {routes, cost, variant, wall_ms}
Json solution_to_json(const SolutionRecord& record);
SolutionRecord solution_from_json(const Json& json);

void write_json(const Json& json, const std::filesystem::path& path);
Json read_json(const std::filesystem::path& path);

}  // namespace mtvrp
