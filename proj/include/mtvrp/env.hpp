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
#include <span>
#include <vector>

#include "mtvrp/core.hpp"

namespace mtvrp {

/// Dynamic state of one trajectory. The attribute vector is
/// (remaining_capacity, current_time, route_length, open).
struct RolloutState {
  std::vector<char> visited;  ///< per node; the depot entry stays false
  int current = 0;
  double remaining_capacity = 1.0;
  double current_time = 0.0;
  double route_length = 0.0;
  bool open = false;
  int step = 0;
  int visited_customers = 0;
  bool done = false;
};

/// Why a node is masked. Several reasons can apply at once.
enum MaskReason : std::uint8_t {
  kMaskVisited = 1U << 0U,
  kMaskCapacity = 1U << 1U,
  kMaskTimeWindow = 1U << 2U,
  kMaskDurationLimit = 1U << 3U,
  kMaskDepotRule = 1U << 4U,
};

struct MaskVector {
  std::vector<char> masked;
  std::vector<std::uint8_t> reasons;

  [[nodiscard]] bool is_masked(int node) const noexcept { return masked[node] != 0; }
  [[nodiscard]] int unmasked_count() const noexcept;
};

/// Per-attribute infeasible-node sets over all nodes (the depot is never in
/// them). Inactive attributes produce empty (all-false) sets.
struct AttributeMasks {
  std::vector<char> capacity;
  std::vector<char> time_window;
  std::vector<char> duration_limit;
};

using AttributeVector = std::array<double, 4>;

struct ReplayResult {
  Verdict verdict;
  Solution solution;
  double cost = 0.0;
  int failed_step = -1;  ///< index into the sequence of the rejected node
};

/// The attribute-composition state machine for one instance. Each active
/// attribute contributes its own update and mask; the feasible set is the
/// complement of visited nodes united with every active attribute mask.
class RoutingEnv {
 public:
  explicit RoutingEnv(const Instance& instance, FeasibilityRules rules = {});

  [[nodiscard]] const Instance& instance() const noexcept { return instance_; }
  [[nodiscard]] const DistanceMatrix& distances() const noexcept { return dist_; }
  [[nodiscard]] const FeasibilityRules& rules() const noexcept { return rules_; }

  /// State before the first move: at the depot, nothing visited.
  [[nodiscard]] RolloutState initial_state() const;
  /// initial_state() followed by a visit to `start_node`. Throws
  /// ValidationError if that customer cannot be the first visit.
  [[nodiscard]] RolloutState reset(int start_node) const;
  /// Whether `node` is selectable as the first visit of a fresh rollout.
  [[nodiscard]] bool feasible_start(int node) const;

  [[nodiscard]] AttributeVector attribute_vector(const RolloutState& state) const noexcept;
  [[nodiscard]] AttributeMasks attribute_masks(const RolloutState& state) const;
  /// Throws InvariantError on a dead end (nothing selectable before done).
  [[nodiscard]] MaskVector feasible_mask(const RolloutState& state) const;
  /// Allocation-free variant used by batched rollouts.
  void feasible_mask(const RolloutState& state, MaskVector& out) const;

  /// Throws InvariantError if `node` is masked.
  [[nodiscard]] RolloutState step(const RolloutState& state, int node) const;
  /// Applies the update without re-checking the mask.
  void advance(RolloutState& state, int node) const noexcept;

  /// Steps through `sequence` (implicit leading depot; depot returns as 0;
  /// the final return of closed routes may be omitted).
  [[nodiscard]] ReplayResult replay(std::span<const int> sequence) const;

 private:
  void fill_mask(const RolloutState& state, MaskVector& out, bool throw_on_dead_end) const;

  Instance instance_;
  DistanceMatrix dist_;
  FeasibilityRules rules_;
};

}  // namespace mtvrp
