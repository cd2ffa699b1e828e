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

#include "mtvrp/env.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>

#include "mtvrp/errors.hpp"

namespace mtvrp {

int MaskVector::unmasked_count() const noexcept {
  return static_cast<int>(std::count(masked.begin(), masked.end(), 0));
}

RoutingEnv::RoutingEnv(const Instance& instance, FeasibilityRules rules)
    : instance_(instance), dist_(build_distance_matrix(instance)), rules_(rules) {}

RolloutState RoutingEnv::initial_state() const {
  RolloutState s;
  s.visited.assign(static_cast<std::size_t>(instance_.node_count()), 0);
  s.open = instance_.attrs.open;
  return s;
}

bool RoutingEnv::feasible_start(int node) const {
  if (node < 1 || node > instance_.customer_count()) return false;
  const RolloutState s = initial_state();
  MaskVector mask;
  fill_mask(s, mask, false);
  return !mask.is_masked(node);
}

RolloutState RoutingEnv::reset(int start_node) const {
  if (!feasible_start(start_node))
    throw ValidationError(fmt::format("customer {} cannot be the first visit", start_node));
  RolloutState s = initial_state();
  advance(s, start_node);
  return s;
}

AttributeVector RoutingEnv::attribute_vector(const RolloutState& s) const noexcept {
  const auto& a = instance_.attrs;
  return {s.remaining_capacity, a.time_windows ? s.current_time : 0.0,
          a.duration_limit ? s.route_length : 0.0, a.open ? 1.0 : 0.0};
}

AttributeMasks RoutingEnv::attribute_masks(const RolloutState& s) const {
  const int nodes = instance_.node_count();
  const auto& a = instance_.attrs;
  const double tol = kFeasibilityTolerance;
  AttributeMasks m;
  m.capacity.assign(nodes, 0);
  m.time_window.assign(nodes, 0);
  m.duration_limit.assign(nodes, 0);
  const int cur = s.current;
  const bool closed = !a.open;
  const double limit = instance_.duration_limit.value_or(0.0);

  for (int j = 1; j < nodes; ++j) {
    const double after = s.remaining_capacity - instance_.demands[j];
    m.capacity[j] = static_cast<char>(after < -tol || (rules_.capacity_upper_bound && after > 1.0 + tol));

    if (a.time_windows) {
      const double start =
          std::max(s.current_time + dist_(cur, j) / instance_.speed, instance_.tw_early[j]);
      bool late = start > instance_.tw_late[j] + tol;
      if (!late && closed)
        late = start + instance_.service[j] + dist_(j, 0) / instance_.speed >
               instance_.depot_horizon + tol;
      m.time_window[j] = static_cast<char>(late);
    }
    if (a.duration_limit) {
      double length = s.route_length + dist_(cur, j);
      if (closed && rules_.limit_return_lookahead) length += dist_(j, 0);
      m.duration_limit[j] = static_cast<char>(length > limit + tol);
    }
  }
  return m;
}

void RoutingEnv::fill_mask(const RolloutState& s, MaskVector& out, bool throw_on_dead_end) const {
  const int nodes = instance_.node_count();
  out.masked.assign(nodes, 0);
  out.reasons.assign(nodes, 0);
  if (s.done) {
    std::fill(out.masked.begin(), out.masked.end(), 1);
    return;
  }
  const auto& a = instance_.attrs;
  const double tol = kFeasibilityTolerance;
  const int cur = s.current;
  const bool closed = !a.open;
  const double limit = instance_.duration_limit.value_or(0.0);

  bool any_customer = false;
  for (int j = 1; j < nodes; ++j) {
    std::uint8_t why = 0;
    if (s.visited[j]) why |= kMaskVisited;
    const double after = s.remaining_capacity - instance_.demands[j];
    if (after < -tol || (rules_.capacity_upper_bound && after > 1.0 + tol)) why |= kMaskCapacity;
    if (a.time_windows) {
      const double start =
          std::max(s.current_time + dist_(cur, j) / instance_.speed, instance_.tw_early[j]);
      if (start > instance_.tw_late[j] + tol ||
          (closed && start + instance_.service[j] + dist_(j, 0) / instance_.speed >
                         instance_.depot_horizon + tol))
        why |= kMaskTimeWindow;
    }
    if (a.duration_limit) {
      double length = s.route_length + dist_(cur, j);
      if (closed && rules_.limit_return_lookahead) length += dist_(j, 0);
      if (length > limit + tol) why |= kMaskDurationLimit;
    }
    out.reasons[j] = why;
    out.masked[j] = static_cast<char>(why != 0);
    any_customer = any_customer || why == 0;
  }
  // No empty routes: the depot is only selectable away from the depot.
  if (cur == 0) {
    out.masked[0] = 1;
    out.reasons[0] = kMaskDepotRule;
    if (!any_customer && throw_on_dead_end)
      throw InvariantError(fmt::format(
          "dead end in '{}': at the depot with {} unvisited customers and none selectable",
          instance_.name, instance_.customer_count() - s.visited_customers));
  }
}

MaskVector RoutingEnv::feasible_mask(const RolloutState& state) const {
  MaskVector out;
  fill_mask(state, out, true);
  return out;
}

void RoutingEnv::feasible_mask(const RolloutState& state, MaskVector& out) const {
  fill_mask(state, out, true);
}

void RoutingEnv::advance(RolloutState& s, int node) const noexcept {
  const int customers = instance_.customer_count();
  ++s.step;
  if (node == 0) {
    s.current = 0;
    s.remaining_capacity = 1.0;
    s.current_time = 0.0;
    s.route_length = 0.0;
    if (s.visited_customers == customers) s.done = true;
    return;
  }
  const double leg = dist_(s.current, node);
  s.remaining_capacity -= instance_.demands[node];
  if (instance_.attrs.time_windows)
    s.current_time = std::max(s.current_time + leg / instance_.speed, instance_.tw_early[node]) +
                     instance_.service[node];
  s.route_length += leg;
  s.current = node;
  s.visited[node] = 1;
  ++s.visited_customers;
  if (s.open && s.visited_customers == customers) s.done = true;
}

RolloutState RoutingEnv::step(const RolloutState& state, int node) const {
  if (node < 0 || node >= instance_.node_count())
    throw InvariantError(fmt::format("node {} out of range", node));
  MaskVector mask;
  fill_mask(state, mask, true);
  if (mask.is_masked(node))
    throw InvariantError(
        fmt::format("node {} is masked (reasons {:#x}) at step {}", node, mask.reasons[node], state.step));
  RolloutState next = state;
  advance(next, node);
  return next;
}

namespace {

ViolationKind kind_for(std::uint8_t reasons) {
  if (reasons & kMaskVisited) return ViolationKind::structural;
  if (reasons & kMaskDepotRule) return ViolationKind::structural;
  if (reasons & kMaskCapacity) return ViolationKind::capacity;
  if (reasons & kMaskTimeWindow) return ViolationKind::time_window;
  if (reasons & kMaskDurationLimit) return ViolationKind::duration_limit;
  return ViolationKind::structural;
}

}  // namespace

ReplayResult RoutingEnv::replay(std::span<const int> sequence) const {
  ReplayResult result;
  RolloutState s = initial_state();
  MaskVector mask;
  std::vector<int> taken;
  taken.reserve(sequence.size() + 1);

  auto fail = [&](int step, ViolationKind kind, int node, std::string msg) {
    result.verdict = Verdict{kind, -1, step, node, std::move(msg)};
    result.failed_step = step;
    result.solution = solution_from_sequence(taken);
    return result;
  };

  for (int k = 0; k < static_cast<int>(sequence.size()); ++k) {
    const int node = sequence[k];
    if (node < 0 || node >= instance_.node_count())
      return fail(k, ViolationKind::structural, node, fmt::format("node {} out of range", node));
    if (s.done) {
      if (node == 0) continue;  // a trailing return adds nothing once every customer is served
      return fail(k, ViolationKind::structural, node, "sequence continues after completion");
    }
    fill_mask(s, mask, false);
    if (mask.unmasked_count() == 0)
      return fail(k, ViolationKind::structural, node, "dead end: no selectable node");
    if (mask.is_masked(node)) {
      const auto why = mask.reasons[node];
      return fail(k, kind_for(why), node,
                  fmt::format("step {}: node {} masked (reasons {:#x})", k, node, why));
    }
    advance(s, node);
    taken.push_back(node);
  }
  if (!s.done && s.visited_customers == instance_.customer_count() && s.current != 0) {
    advance(s, 0);
    taken.push_back(0);
  }
  if (!s.done)
    return fail(static_cast<int>(sequence.size()), ViolationKind::structural, -1,
                fmt::format("{} customers left unvisited",
                            instance_.customer_count() - s.visited_customers));
  result.solution = solution_from_sequence(taken);
  result.solution.instance_id = instance_.name;
  result.cost = solution_cost(result.solution, instance_, dist_);
  return result;
}

}  // namespace mtvrp
