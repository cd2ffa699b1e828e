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

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mtvrp {

/// Absolute slack used by every feasibility comparison (masks and validation).
inline constexpr double kFeasibilityTolerance = 1e-9;

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

double euclidean_distance(Point a, Point b) noexcept;

/// Which routing attributes are active. Capacity is always on: every variant
/// extends CVRP.
struct AttributeSet {
  bool capacity = true;
  bool time_windows = false;
  bool open = false;
  bool backhaul = false;
  bool duration_limit = false;

  /// Canonical name, e.g. {TW, O} -> "OVRPTW", {} -> "CVRP".
  [[nodiscard]] std::string variant_name() const;
  /// Inverse of variant_name(). Case-insensitive; throws UsageError.
  static AttributeSet from_variant(std::string_view name);

  friend bool operator==(const AttributeSet&, const AttributeSet&) = default;
};

/// The 16 canonical attribute combinations.
std::span<const std::string_view> all_variants() noexcept;
/// The 5 variants the unified model is trained on.
std::span<const std::string_view> training_variants() noexcept;
/// The 11 evaluated variants (5 training + 6 with unseen combinations).
std::span<const std::string_view> evaluated_variants() noexcept;

/// One routing problem. Node 0 is the depot, customers are 1..n. Demands,
/// capacity and duration limit are stored normalized (capacity == 1).
/// Time-window arrays are empty unless attrs.time_windows is set.
struct Instance {
  std::string name;
  std::vector<Point> coords;
  std::vector<double> demands;
  std::vector<double> tw_early;
  std::vector<double> tw_late;
  std::vector<double> service;
  double capacity = 1.0;
  std::optional<double> duration_limit;
  double depot_horizon = 0.0;
  double speed = 1.0;
  AttributeSet attrs;
  std::uint64_t seed = 0;

  [[nodiscard]] int customer_count() const noexcept {
    return static_cast<int>(coords.size()) - 1;
  }
  [[nodiscard]] int node_count() const noexcept { return static_cast<int>(coords.size()); }
  [[nodiscard]] double early(int i) const noexcept { return tw_early.empty() ? 0.0 : tw_early[i]; }
  [[nodiscard]] double late(int i) const noexcept { return tw_late.empty() ? 0.0 : tw_late[i]; }
  [[nodiscard]] double service_time(int i) const noexcept {
    return service.empty() ? 0.0 : service[i];
  }
};

/// Throws ValidationError describing the first broken instance invariant.
void validate_instance(const Instance& instance);

/// Dense symmetric Euclidean distance matrix over all nodes.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(int nodes) : nodes_(nodes), data_(static_cast<std::size_t>(nodes) * nodes) {}

  [[nodiscard]] double operator()(int i, int j) const noexcept {
    return data_[static_cast<std::size_t>(i) * nodes_ + j];
  }
  double& at(int i, int j) noexcept { return data_[static_cast<std::size_t>(i) * nodes_ + j]; }
  [[nodiscard]] int size() const noexcept { return nodes_; }
  [[nodiscard]] std::span<const double> values() const noexcept { return data_; }

 private:
  int nodes_ = 0;
  std::vector<double> data_;
};

DistanceMatrix build_distance_matrix(const Instance& instance);

/// Routes exclude the depot endpoints.
struct Solution {
  std::vector<std::vector<int>> routes;
  std::string instance_id;
};

/// Sum of route lengths; return legs are dropped for open routes.
/// Throws ValidationError on out-of-range node indices.
double solution_cost(const Solution& solution, const Instance& instance);
double solution_cost(const Solution& solution, const Instance& instance,
                     const DistanceMatrix& dist);

enum class ViolationKind {
  none,
  structural,
  capacity,
  time_window,
  duration_limit,
  depot_return,
};

std::string_view to_string(ViolationKind kind) noexcept;

struct Verdict {
  ViolationKind kind = ViolationKind::none;
  int route = -1;     ///< index of the offending route, -1 if not route-specific
  int position = -1;  ///< position within the route; route.size() means the return leg
  int node = -1;
  std::string message;

  [[nodiscard]] bool feasible() const noexcept { return kind == ViolationKind::none; }
};

/// Switches for the two readings the routing rules leave open.
struct FeasibilityRules {
  /// Also require remaining capacity <= 1 after pickups. Off by default:
  /// with a full vehicle at the depot the bound makes pickup customers
  /// unservable on their own and strands routes that end with pickups.
  bool capacity_upper_bound = false;
  /// Closed routes: mask customers whose visit leaves no room to get back to
  /// the depot within the duration limit. Used by the environment only.
  bool limit_return_lookahead = true;
};

/// Checks one route (depot endpoints implicit) against every active
/// constraint, including the return leg of closed routes. Coverage is not
/// checked.
Verdict check_route(std::span<const int> route, const Instance& instance,
                    const FeasibilityRules& rules = {});

/// Replays each route through the capacity/time/length updates and reports
/// the first violated constraint. Pure and deterministic.
Verdict validate_solution(const Solution& solution, const Instance& instance,
                          const FeasibilityRules& rules = {});

/// Splits a node sequence (depot returns encoded as 0) into routes.
Solution solution_from_sequence(std::span<const int> sequence);

/// Sequence form of a solution: customers with a 0 between routes and, for
/// closed routes, a trailing 0.
std::vector<int> sequence_from_solution(const Solution& solution, bool open);

}  // namespace mtvrp
