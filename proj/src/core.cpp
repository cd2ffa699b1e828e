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

#include "mtvrp/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <fmt/format.h>

#include "mtvrp/errors.hpp"

namespace mtvrp {

namespace {

constexpr std::array<std::string_view, 16> kAllVariants = {
    "CVRP",   "OVRP",   "VRPB",    "VRPL",    "VRPTW",   "OVRPB",   "OVRPL",   "OVRPTW",
    "VRPBL",  "VRPBTW", "VRPLTW",  "OVRPBL",  "OVRPBTW", "OVRPLTW", "VRPBLTW", "OVRPBLTW",
};

constexpr std::array<std::string_view, 5> kTrainingVariants = {"CVRP", "VRPTW", "OVRP", "VRPB",
                                                               "VRPL"};

constexpr std::array<std::string_view, 11> kEvaluatedVariants = {
    "CVRP",  "VRPTW", "OVRP",    "VRPB",    "VRPL",    "VRPBTW",
    "VRPBL", "OVRPL", "OVRPLTW", "OVRPBTW", "OVRPBLTW",
};

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

bool close_to_unit(double v) { return v >= -kFeasibilityTolerance && v <= 1.0 + kFeasibilityTolerance; }

}  // namespace

double euclidean_distance(Point a, Point b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

std::string AttributeSet::variant_name() const {
  if (!time_windows && !open && !backhaul && !duration_limit) return "CVRP";
  std::string name = open ? "OVRP" : "VRP";
  if (backhaul) name += "B";
  if (duration_limit) name += "L";
  if (time_windows) name += "TW";
  return name;
}

AttributeSet AttributeSet::from_variant(std::string_view name) {
  const std::string want = upper(name);
  for (int mask = 0; mask < 16; ++mask) {
    AttributeSet attrs;
    attrs.open = (mask & 1) != 0;
    attrs.backhaul = (mask & 2) != 0;
    attrs.duration_limit = (mask & 4) != 0;
    attrs.time_windows = (mask & 8) != 0;
    if (attrs.variant_name() == want) return attrs;
  }
  throw UsageError(fmt::format("unknown VRP variant '{}'", name));
}

std::span<const std::string_view> all_variants() noexcept { return kAllVariants; }
std::span<const std::string_view> training_variants() noexcept { return kTrainingVariants; }
std::span<const std::string_view> evaluated_variants() noexcept { return kEvaluatedVariants; }

void validate_instance(const Instance& in) {
  const int nodes = in.node_count();
  auto fail = [&](const std::string& msg) {
    throw ValidationError(fmt::format("instance '{}': {}", in.name, msg));
  };
  if (nodes < 2) fail("needs a depot and at least one customer");
  if (!in.attrs.capacity) fail("capacity attribute must be active");
  if (static_cast<int>(in.demands.size()) != nodes) fail("demands size mismatch");
  if (std::abs(in.capacity - 1.0) > kFeasibilityTolerance) fail("capacity must be normalized to 1");
  if (!(in.speed > 0.0) || !std::isfinite(in.speed)) fail("speed must be positive");
  for (int i = 0; i < nodes; ++i) {
    const Point p = in.coords[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !close_to_unit(p.x) || !close_to_unit(p.y))
      fail(fmt::format("node {} coordinate outside the unit square", i));
  }
  if (in.demands[0] != 0.0) fail("depot demand must be 0");
  bool any_backhaul = false;
  for (int i = 1; i < nodes; ++i) {
    const double d = in.demands[i];
    if (!std::isfinite(d) || d < -1.0 - kFeasibilityTolerance || d > 1.0 + kFeasibilityTolerance)
      fail(fmt::format("customer {} demand {} outside [-1, 1]", i, d));
    if (d < 0.0) any_backhaul = true;
  }
  if (any_backhaul && !in.attrs.backhaul) fail("negative demand without the backhaul attribute");
  if (in.attrs.backhaul && !any_backhaul) fail("backhaul attribute without any pickup customer");

  if (in.attrs.duration_limit) {
    if (!in.duration_limit || !(*in.duration_limit > 0.0)) fail("duration limit must be positive");
  }
  if (in.attrs.time_windows) {
    if (static_cast<int>(in.tw_early.size()) != nodes || static_cast<int>(in.tw_late.size()) != nodes ||
        static_cast<int>(in.service.size()) != nodes)
      fail("time-window arrays size mismatch");
    const double horizon = in.depot_horizon;
    if (!(horizon > 0.0)) fail("depot horizon must be positive");
    if (in.tw_early[0] != 0.0 || std::abs(in.tw_late[0] - horizon) > kFeasibilityTolerance ||
        in.service[0] != 0.0)
      fail("depot window must be [0, T] with zero service");
    for (int i = 1; i < nodes; ++i) {
      const double e = in.tw_early[i];
      const double l = in.tw_late[i];
      if (!(e >= 0.0) || !(e < l) || l > horizon + kFeasibilityTolerance)
        fail(fmt::format("customer {} window [{}, {}] invalid for horizon {}", i, e, l, horizon));
      if (in.service[i] < 0.0) fail(fmt::format("customer {} negative service time", i));
      const double reach = euclidean_distance(in.coords[0], in.coords[i]) / in.speed;
      if (e < reach - kFeasibilityTolerance)
        fail(fmt::format("customer {} opens before it can be reached from the depot", i));
    }
  }
}

DistanceMatrix build_distance_matrix(const Instance& instance) {
  const int nodes = instance.node_count();
  DistanceMatrix dist(nodes);
  for (int i = 0; i < nodes; ++i) {
    dist.at(i, i) = 0.0;
    for (int j = i + 1; j < nodes; ++j) {
      const double d = euclidean_distance(instance.coords[i], instance.coords[j]);
      dist.at(i, j) = d;
      dist.at(j, i) = d;
    }
  }
  return dist;
}

double solution_cost(const Solution& solution, const Instance& instance) {
  const int nodes = instance.node_count();
  double total = 0.0;
  for (const auto& route : solution.routes) {
    int prev = 0;
    for (int node : route) {
      if (node < 0 || node >= nodes)
        throw ValidationError(fmt::format("node index {} out of range [0, {})", node, nodes));
      total += euclidean_distance(instance.coords[prev], instance.coords[node]);
      prev = node;
    }
    if (!instance.attrs.open) total += euclidean_distance(instance.coords[prev], instance.coords[0]);
  }
  return total;
}

double solution_cost(const Solution& solution, const Instance& instance,
                     const DistanceMatrix& dist) {
  const int nodes = instance.node_count();
  double total = 0.0;
  for (const auto& route : solution.routes) {
    int prev = 0;
    for (int node : route) {
      if (node < 0 || node >= nodes)
        throw ValidationError(fmt::format("node index {} out of range [0, {})", node, nodes));
      total += dist(prev, node);
      prev = node;
    }
    if (!instance.attrs.open) total += dist(prev, 0);
  }
  return total;
}

std::string_view to_string(ViolationKind kind) noexcept {
  switch (kind) {
    case ViolationKind::none: return "feasible";
    case ViolationKind::structural: return "structural";
    case ViolationKind::capacity: return "capacity";
    case ViolationKind::time_window: return "time_window";
    case ViolationKind::duration_limit: return "duration_limit";
    case ViolationKind::depot_return: return "depot_return";
  }
  return "unknown";
}

Verdict check_route(std::span<const int> route, const Instance& instance,
                    const FeasibilityRules& rules) {
  auto violation = [](ViolationKind kind, int pos, int node, std::string msg) {
    return Verdict{kind, -1, pos, node, std::move(msg)};
  };
  const auto& attrs = instance.attrs;
  const double tol = kFeasibilityTolerance;
  const double limit = instance.duration_limit.value_or(0.0);
  auto dist = [&](int a, int b) { return euclidean_distance(instance.coords[a], instance.coords[b]); };

  double remaining = 1.0;
  double time = 0.0;
  double length = 0.0;
  int prev = 0;
  for (int p = 0; p < static_cast<int>(route.size()); ++p) {
    const int node = route[p];
    if (node < 1 || node >= instance.node_count())
      return violation(ViolationKind::structural, p, node, "node is not a customer index");
    const double leg = dist(prev, node);
    remaining -= instance.demands[node];
    if (remaining < -tol || (rules.capacity_upper_bound && remaining > 1.0 + tol))
      return violation(ViolationKind::capacity, p, node,
                       fmt::format("remaining capacity {} out of bounds", remaining));
    if (attrs.time_windows) {
      const double start = std::max(time + leg / instance.speed, instance.tw_early[node]);
      if (start > instance.tw_late[node] + tol)
        return violation(ViolationKind::time_window, p, node,
                         fmt::format("service starts at {} after late time {}", start,
                                     instance.tw_late[node]));
      time = start + instance.service[node];
    }
    length += leg;
    if (attrs.duration_limit && length > limit + tol)
      return violation(ViolationKind::duration_limit, p, node,
                       fmt::format("route length {} exceeds limit {}", length, limit));
    prev = node;
  }
  if (!attrs.open && !route.empty()) {
    const int end = static_cast<int>(route.size());
    const double back = dist(prev, 0);
    if (attrs.time_windows && time + back / instance.speed > instance.depot_horizon + tol)
      return violation(ViolationKind::depot_return, end, 0,
                       fmt::format("returns to depot at {} after horizon {}",
                                   time + back / instance.speed, instance.depot_horizon));
    if (attrs.duration_limit && length + back > limit + tol)
      return violation(ViolationKind::duration_limit, end, 0,
                       fmt::format("closed route length {} exceeds limit {}", length + back, limit));
  }
  return {};
}

Verdict validate_solution(const Solution& solution, const Instance& instance,
                          const FeasibilityRules& rules) {
  const int nodes = instance.node_count();
  const int customers = nodes - 1;
  auto violation = [](ViolationKind kind, int r, int pos, int node, std::string msg) {
    return Verdict{kind, r, pos, node, std::move(msg)};
  };

  std::vector<int> seen(static_cast<std::size_t>(nodes), 0);
  for (int r = 0; r < static_cast<int>(solution.routes.size()); ++r) {
    const auto& route = solution.routes[r];
    if (route.empty()) return violation(ViolationKind::structural, r, 0, -1, "empty route");
    for (int p = 0; p < static_cast<int>(route.size()); ++p) {
      const int node = route[p];
      if (node < 1 || node > customers)
        return violation(ViolationKind::structural, r, p, node, "node is not a customer index");
      if (++seen[node] > 1)
        return violation(ViolationKind::structural, r, p, node, "customer visited twice");
    }
  }
  for (int i = 1; i <= customers; ++i)
    if (seen[i] == 0)
      return violation(ViolationKind::structural, -1, -1, i, fmt::format("customer {} not visited", i));

  for (int r = 0; r < static_cast<int>(solution.routes.size()); ++r) {
    Verdict v = check_route(solution.routes[r], instance, rules);
    if (!v.feasible()) {
      v.route = r;
      return v;
    }
  }
  return {};
}

Solution solution_from_sequence(std::span<const int> sequence) {
  Solution solution;
  std::vector<int> current;
  for (int node : sequence) {
    if (node == 0) {
      if (!current.empty()) solution.routes.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(node);
    }
  }
  if (!current.empty()) solution.routes.push_back(std::move(current));
  return solution;
}

std::vector<int> sequence_from_solution(const Solution& solution, bool open) {
  std::vector<int> seq;
  for (std::size_t r = 0; r < solution.routes.size(); ++r) {
    if (r > 0) seq.push_back(0);
    seq.insert(seq.end(), solution.routes[r].begin(), solution.routes[r].end());
  }
  if (!open && !seq.empty()) seq.push_back(0);
  return seq;
}

}  // namespace mtvrp
