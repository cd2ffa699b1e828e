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

#include "mtvrp/baselines.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <limits>

#include "mtvrp/errors.hpp"

namespace mtvrp {

namespace {

enum class Pick { nearest, farthest };

double route_cost(std::span<const int> route, const DistanceMatrix& dist, bool open) {
  double total = 0.0;
  int prev = 0;
  for (int node : route) {
    total += dist(prev, node);
    prev = node;
  }
  if (!open && !route.empty()) total += dist(prev, 0);
  return total;
}

BaselineResult insertion(const Instance& instance, const FeasibilityRules& rules, Pick pick) {
  const int n = instance.customer_count();
  const DistanceMatrix dist = build_distance_matrix(instance);
  const bool open = instance.attrs.open;
  const bool nearest = pick == Pick::nearest;
  auto better = [&](double a, double b) { return nearest ? a < b : a > b; };

  std::vector<char> routed(static_cast<std::size_t>(n) + 1, 0);
  int remaining = n;
  BaselineResult result;
  std::vector<int> route;
  std::vector<int> trial;
  std::vector<int> order;

  while (remaining > 0) {
    // Candidate customers ordered by the selection rule.
    order.clear();
    std::vector<double> key(static_cast<std::size_t>(n) + 1, 0.0);
    for (int j = 1; j <= n; ++j) {
      if (routed[j]) continue;
      double d = dist(0, j);
      for (int v : route) d = std::min(d, dist(v, j));
      key[j] = d;
      order.push_back(j);
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return better(key[a], key[b]); });

    bool placed = false;
    for (int j : order) {
      int best_pos = -1;
      double best_delta = std::numeric_limits<double>::infinity();
      const double base = route_cost(route, dist, open);
      for (std::size_t pos = 0; pos <= route.size(); ++pos) {
        trial = route;
        trial.insert(trial.begin() + static_cast<std::ptrdiff_t>(pos), j);
        if (!check_route(trial, instance, rules).feasible()) continue;
        const double delta = route_cost(trial, dist, open) - base;
        if (delta < best_delta) {
          best_delta = delta;
          best_pos = static_cast<int>(pos);
        }
      }
      if (best_pos < 0) continue;
      route.insert(route.begin() + best_pos, j);
      routed[j] = 1;
      --remaining;
      placed = true;
      break;
    }
    if (!placed) {
      if (route.empty())
        throw ValidationError(fmt::format("'{}': no customer can be served by a route of its own", instance.name));
      result.solution.routes.push_back(std::move(route));
      route.clear();
    }
  }
  if (!route.empty()) result.solution.routes.push_back(std::move(route));
  result.solution.instance_id = instance.name;
  result.cost = solution_cost(result.solution, instance, dist);
  return result;
}

}  // namespace

BaselineResult nearest_insertion(const Instance& instance, const FeasibilityRules& rules) {
  return insertion(instance, rules, Pick::nearest);
}

BaselineResult farthest_insertion(const Instance& instance, const FeasibilityRules& rules) {
  return insertion(instance, rules, Pick::farthest);
}

namespace {

/// Enumerates every feasible ordered route; each DFS node is a route over the
/// subset visited so far. The per-node checks mirror check_route, and a
/// violated prefix cannot be repaired by appending customers.
class RouteEnumerator {
 public:
  RouteEnumerator(const Instance& instance, const FeasibilityRules& rules)
      : in_(instance), rules_(rules), dist_(build_distance_matrix(instance)), n_(instance.customer_count()) {
    const std::size_t subsets = std::size_t{1} << n_;
    best_cost_.assign(subsets, std::numeric_limits<double>::infinity());
    best_route_.resize(subsets);
  }

  void run() {
    path_.clear();
    dfs(0, 0, 1.0, 0.0, 0.0, 0.0);
  }

  [[nodiscard]] double cost(std::size_t subset) const { return best_cost_[subset]; }
  [[nodiscard]] const std::vector<int>& route(std::size_t subset) const { return best_route_[subset]; }

 private:
  void dfs(std::size_t subset, int prev, double remaining, double time, double length, double cost) {
    const double tol = kFeasibilityTolerance;
    for (int j = 1; j <= n_; ++j) {
      const std::size_t bit = std::size_t{1} << (j - 1);
      if (subset & bit) continue;
      const double leg = dist_(prev, j);
      const double rem = remaining - in_.demands[j];
      if (rem < -tol || (rules_.capacity_upper_bound && rem > 1.0 + tol)) continue;
      double t = time;
      if (in_.attrs.time_windows) {
        const double start = std::max(time + leg / in_.speed, in_.tw_early[j]);
        if (start > in_.tw_late[j] + tol) continue;
        t = start + in_.service[j];
      }
      const double len = length + leg;
      if (in_.attrs.duration_limit && len > *in_.duration_limit + tol) continue;

      path_.push_back(j);
      const std::size_t next = subset | bit;
      double total = cost + leg;
      bool ok = true;
      if (!in_.attrs.open) {
        const double back = dist_(j, 0);
        if (in_.attrs.time_windows && t + back / in_.speed > in_.depot_horizon + tol) ok = false;
        if (in_.attrs.duration_limit && len + back > *in_.duration_limit + tol) ok = false;
        total += back;
      }
      if (ok && total < best_cost_[next]) {
        best_cost_[next] = total;
        best_route_[next] = path_;
      }
      dfs(next, j, rem, t, len, cost + leg);
      path_.pop_back();
    }
  }

  const Instance& in_;
  FeasibilityRules rules_;
  DistanceMatrix dist_;
  int n_;
  std::vector<double> best_cost_;
  std::vector<std::vector<int>> best_route_;
  std::vector<int> path_;
};

}  // namespace

BaselineResult brute_force(const Instance& instance, const FeasibilityRules& rules) {
  const int n = instance.customer_count();
  if (n > kBruteForceMaxCustomers)
    throw UsageError(fmt::format("brute force supports at most {} customers, instance has {}",
                                 kBruteForceMaxCustomers, n));
  BaselineResult result;
  result.solution.instance_id = instance.name;
  if (n == 0) return result;

  RouteEnumerator routes(instance, rules);
  routes.run();

  // Partition DP; the route holding the lowest customer of each subset is
  // enumerated first so every partition is counted once.
  const std::size_t full = (std::size_t{1} << n) - 1;
  std::vector<double> best(full + 1, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> choice(full + 1, 0);
  best[0] = 0.0;
  for (std::size_t s = 1; s <= full; ++s) {
    const std::size_t low = s & (~s + 1);
    const std::size_t rest = s ^ low;
    for (std::size_t sub = rest;; sub = (sub - 1) & rest) {
      const std::size_t part = sub | low;
      const double c = routes.cost(part) + best[s ^ part];
      if (c < best[s]) {
        best[s] = c;
        choice[s] = part;
      }
      if (sub == 0) break;
    }
  }
  if (!(best[full] < std::numeric_limits<double>::infinity())) {
    result.feasible = false;
    result.cost = std::numeric_limits<double>::infinity();
    return result;
  }
  for (std::size_t s = full; s != 0; s ^= choice[s]) result.solution.routes.push_back(routes.route(choice[s]));
  result.cost = solution_cost(result.solution, instance);
  return result;
}

}  // namespace mtvrp
