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

#include "mtvrp/core.hpp"

namespace mtvrp {

struct BaselineResult {
  Solution solution;
  double cost = 0.0;
  bool feasible = true;
};

/// Route-by-route insertion. Each route is seeded with the unrouted customer
/// nearest to the depot; then the unrouted customer nearest to the route
/// (minimum distance to any of its nodes, depot included) that has a feasible
/// position is inserted at its cheapest one. A new route starts when no
/// unrouted customer fits. Ties go to the lower index. Feasibility of every
/// tentative route is checked by replaying it with check_route.
BaselineResult nearest_insertion(const Instance& instance, const FeasibilityRules& rules = {});

/// As nearest_insertion with "farthest" in both rules.
BaselineResult farthest_insertion(const Instance& instance, const FeasibilityRules& rules = {});

inline constexpr int kBruteForceMaxCustomers = 9;

/// Exact optimum: the best feasible order of every customer subset by
/// depth-first enumeration, then the best partition of all customers into
/// such routes. Reports feasible = false when no partition exists. Throws
/// UsageError for more than kBruteForceMaxCustomers customers.
BaselineResult brute_force(const Instance& instance, const FeasibilityRules& rules = {});

}  // namespace mtvrp
