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

#include "mtvrp/policy.hpp"
#include "mtvrp/rollout.hpp"

namespace mtvrp {

struct InferenceConfig {
  DecodeMode mode = DecodeMode::greedy;  ///< greedy or sample
  int samples = 1;                       ///< sample mode: rollouts per start
  bool augment8 = false;
  int n_starts = 0;  ///< 0 = one per customer
  std::uint64_t seed = 0;
  FeasibilityRules rules;

  void validate() const;
};

struct SolveResult {
  Solution solution;
  double cost = 0.0;
  int transform = 0;  ///< augmentation index that produced the solution
};

/// Argmax decoding from every forced start; the cheapest trajectory wins
/// (earliest start on ties).
SolveResult greedy_solve(const Instance& instance, const PolicyParams& params,
                         const InferenceConfig& config = {});

/// The dihedral maps of the unit square, identity first:
/// (x,y) (y,x) (x,1-y) (y,1-x) (1-x,y) (1-y,x) (1-x,1-y) (1-y,1-x).
Point transform_point(Point p, int transform) noexcept;
std::array<Instance, 8> augment8(const Instance& instance);

/// Greedy decoding on each augmented copy; node indices are shared, so the
/// best copy's routes are already valid for the original instance. Ties keep
/// the lower transform index. Costs are computed and compared on the original.
SolveResult solve_aug8(const Instance& instance, const PolicyParams& params,
                       const InferenceConfig& config = {});

/// `samples` sampled rollouts per start; round k draws from substream k of
/// the seed, so a larger sample count only adds trajectories.
SolveResult sample_solve(const Instance& instance, const PolicyParams& params,
                         const InferenceConfig& config);

/// Dispatches on config.mode and config.augment8.
SolveResult solve(const Instance& instance, const PolicyParams& params, const InferenceConfig& config);

}  // namespace mtvrp
