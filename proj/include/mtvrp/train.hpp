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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mtvrp/instance_io.hpp"
#include "mtvrp/policy.hpp"
#include "mtvrp/rollout.hpp"

namespace mtvrp {

enum class FinetuneMode { off, decoder_only, full };

std::string_view to_string(FinetuneMode mode) noexcept;
/// Accepts off | decoder | decoder_only | full.
FinetuneMode finetune_mode_from_string(std::string_view name);

struct TrainConfig {
  std::vector<std::string> tasks{"CVRP", "VRPTW", "OVRP", "VRPB", "VRPL"};
  int n = 20;  ///< customers per generated instance
  int instances_per_epoch = 10000;
  int batch_size = 64;
  int epochs = 10000;
  double lr = 1e-4;
  double weight_decay = 1e-6;
  int n_starts = 0;  ///< 0 = one trajectory per customer
  std::uint64_t seed = 0;
  FinetuneMode finetune_mode = FinetuneMode::off;
  FeasibilityRules rules;
  /// OpenMP over the instances of a batch. Off: instance-major serial loop.
  bool parallel = true;

  /// Throws UsageError.
  void validate() const;
  /// Fine-tuning defaults: lr 1e-5, weight decay 1e-6, 200 epochs.
  static TrainConfig finetune_defaults(FinetuneMode mode);
};

Json train_config_to_json(const TrainConfig& config);

/// Neumaier-compensated sum.
double compensated_sum(std::span<const double> values) noexcept;

/// Mean of one instance's rewards.
double shared_baseline(std::span<const double> rewards) noexcept;
/// rewards - shared_baseline(rewards).
std::vector<double> advantages(std::span<const double> rewards);

/// REINFORCE ascent direction for B recorded sampled batches (one per
/// instance): (1 / (n B)) sum_i sum_j (R_ij - b_i) grad log p(tau_ij) with
/// R = -cost. Callers minimizing a loss must negate it. Throws UsageError on
/// a greedy batch.
PolicyParams reinforce_gradient(std::span<const RolloutBatch> batches, const PolicyParams& params,
                                bool decoder_only = false);

/// Adam with decoupled weight decay and a constant learning rate. step()
/// takes the ascent direction and moves the parameters along it.
class AdamW {
 public:
  AdamW(const PolicyParams& like, double lr, double weight_decay, double beta1 = 0.9,
        double beta2 = 0.999, double eps = 1e-8);

  /// With `decoder_only` set, encoder tensors and their moments are untouched.
  void step(PolicyParams& params, const PolicyParams& ascent, bool decoder_only = false);

  [[nodiscard]] long steps() const noexcept { return t_; }
  void set_lr(double lr) noexcept { lr_ = lr; }

 private:
  PolicyParams m_, v_;
  double lr_, wd_, beta1_, beta2_, eps_;
  long t_ = 0;
};

/// Task drawn uniformly for one batch of an epoch.
int batch_task(std::uint64_t epoch_seed, int batch, int task_count) noexcept;

struct TaskMetrics {
  int batches = 0;
  int instances = 0;
  double mean_cost = 0.0;           ///< over sampled trajectories
  double mean_abs_advantage = 0.0;
};

struct EpochMetrics {
  int epoch = 0;
  int batches = 0;
  int instances = 0;
  double wall_ms = 0.0;
  std::map<std::string, TaskMetrics> tasks;
};

Json epoch_metrics_to_json(const EpochMetrics& metrics);

/// One epoch: ceil(instances_per_epoch / B) batches (the last one may be
/// short), each with one uniformly drawn task and B fresh instances, followed
/// by one optimizer step. Deterministic given epoch_seed when run serially or
/// on one thread.
EpochMetrics train_epoch(PolicyParams& params, AdamW& optimizer, const TrainConfig& config,
                         std::uint64_t epoch_seed);

/// Seed of epoch `index` of a run seeded with `run_seed`.
std::uint64_t epoch_seed(std::uint64_t run_seed, int index) noexcept;

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// config.epochs epochs from the given parameters.
void train(PolicyParams& params, const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Same loop with config.finetune_mode applied: decoder_only freezes the
/// encoder. Throws UsageError if params are uninitialized or the mode is off.
void finetune(PolicyParams& params, const TrainConfig& config, const EpochCallback& on_epoch = {});

}  // namespace mtvrp
