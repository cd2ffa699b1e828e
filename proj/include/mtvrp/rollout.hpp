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

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mtvrp/env.hpp"
#include "mtvrp/policy.hpp"

namespace mtvrp {

enum class DecodeMode { greedy, sample, forced };

struct RolloutOptions {
  DecodeMode mode = DecodeMode::greedy;
  /// Number of trajectories; 0 means one per customer. Each trajectory is
  /// forced to a distinct first customer (the lowest-index feasible ones).
  int n_starts = 0;
  /// Sample mode: trajectory i draws from substream i of this seed.
  std::uint64_t seed = 0;
  /// Keep encoder and decoder caches for rollout_backward / hc inspection.
  bool record = false;
  /// Forced mode: full node sequences (first element is the start).
  std::vector<std::vector<int>> sequences;
  /// Called for every decoded node with the state it was chosen from.
  std::function<void(int trajectory, int node, const AttributeVector&, const MaskVector&)> trace;
};

struct Trajectory {
  int start = 0;
  std::vector<int> sequence;  ///< start, then every decoded node (depot returns as 0)
  double log_prob = 0.0;      ///< sum over decoded steps; the forced start is not scored
  double cost = 0.0;
  Solution solution;
};

struct RolloutBatch {
  DecodeMode mode = DecodeMode::greedy;
  std::vector<Trajectory> trajectories;

  // Present when RolloutOptions::record is set.
  EncoderCache encoder;
  DecoderKeys keys;
  std::vector<DecoderStep> steps;            ///< lockstep decoder passes
  std::vector<std::vector<int>> step_rows;   ///< trajectory index of each row
  std::vector<std::vector<int>> step_actions;

  [[nodiscard]] std::size_t best_index() const;  ///< lowest cost, earliest on ties
};

/// The first `limit` customers (ascending index) that are feasible first visits.
std::vector<int> feasible_starts(const RoutingEnv& env, int limit);

/// Decodes all trajectories of one instance in lockstep: one batched decoder
/// pass per step over the trajectories that are not finished yet. Throws
/// ValidationError if no customer is a feasible start.
RolloutBatch multistart_rollout(const Instance& instance, const PolicyParams& params,
                                const RolloutOptions& options, const FeasibilityRules& rules = {});

/// Accumulates into `grads` the gradient of sum_i weights[i] * log_prob_i for
/// a recorded batch. With `include_encoder` false only decoder tensors are
/// touched and the encoder backward pass is skipped.
void rollout_backward(const RolloutBatch& batch, std::span<const double> weights,
                      const PolicyParams& params, PolicyParams& grads, bool include_encoder = true);

}  // namespace mtvrp
