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

#include "mtvrp/train.hpp"

#include <fmt/format.h>
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mtvrp/errors.hpp"
#include "mtvrp/instancegen.hpp"
#include "mtvrp/rng.hpp"

namespace mtvrp {

std::string_view to_string(FinetuneMode mode) noexcept {
  switch (mode) {
    case FinetuneMode::off: return "off";
    case FinetuneMode::decoder_only: return "decoder_only";
    case FinetuneMode::full: return "full";
  }
  return "off";
}

FinetuneMode finetune_mode_from_string(std::string_view name) {
  if (name == "off") return FinetuneMode::off;
  if (name == "decoder" || name == "decoder_only") return FinetuneMode::decoder_only;
  if (name == "full") return FinetuneMode::full;
  throw UsageError(fmt::format("unknown fine-tune mode '{}' (expected decoder|full)", name));
}

void TrainConfig::validate() const {
  if (tasks.empty()) throw UsageError("at least one task is required");
  for (const auto& t : tasks) (void)AttributeSet::from_variant(t);
  if (n < 1) throw UsageError("n must be >= 1");
  if (batch_size < 1) throw UsageError("batch size must be >= 1");
  if (instances_per_epoch < 1) throw UsageError("instances per epoch must be >= 1");
  if (epochs < 0) throw UsageError("epochs must be >= 0");
  if (n_starts < 0 || n_starts > n) throw UsageError(fmt::format("n_starts must be in [0, {}]", n));
  if (!(lr >= 0.0) || !(weight_decay >= 0.0)) throw UsageError("lr and weight decay must be >= 0");
}

TrainConfig TrainConfig::finetune_defaults(FinetuneMode mode) {
  TrainConfig c;
  c.lr = 1e-5;
  c.weight_decay = 1e-6;
  c.epochs = 200;
  c.finetune_mode = mode;
  return c;
}

Json train_config_to_json(const TrainConfig& c) {
  Json j;
  j["tasks"] = c.tasks;
  j["n"] = c.n;
  j["instances_per_epoch"] = c.instances_per_epoch;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["lr"] = c.lr;
  j["weight_decay"] = c.weight_decay;
  j["n_starts"] = c.n_starts;
  j["seed"] = c.seed;
  j["finetune_mode"] = std::string(to_string(c.finetune_mode));
  j["capacity_upper_bound"] = c.rules.capacity_upper_bound;
  j["limit_return_lookahead"] = c.rules.limit_return_lookahead;
  j["parallel"] = c.parallel;
  return j;
}

double compensated_sum(std::span<const double> values) noexcept {
  double sum = 0.0;
  double comp = 0.0;
  for (const double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  return sum + comp;
}

double shared_baseline(std::span<const double> rewards) noexcept {
  if (rewards.empty()) return 0.0;
  return compensated_sum(rewards) / static_cast<double>(rewards.size());
}

std::vector<double> advantages(std::span<const double> rewards) {
  const double b = shared_baseline(rewards);
  std::vector<double> out(rewards.begin(), rewards.end());
  for (double& r : out) r -= b;
  // One refinement pass removes the rounding left in b.
  const double residual = compensated_sum(out) / static_cast<double>(out.size());
  for (double& r : out) r -= residual;
  return out;
}

namespace {

std::vector<double> rewards_of(const RolloutBatch& batch) {
  std::vector<double> r;
  r.reserve(batch.trajectories.size());
  for (const auto& t : batch.trajectories) r.push_back(-t.cost);
  return r;
}

/// Adds one instance's share of the REINFORCE direction to `grads`; returns
/// the mean absolute advantage.
double accumulate_instance(const RolloutBatch& batch, int instances, const PolicyParams& params,
                           PolicyParams& grads, bool decoder_only) {
  if (batch.mode == DecodeMode::greedy)
    throw UsageError("REINFORCE needs sampled trajectories, got a greedy batch");
  auto adv = advantages(rewards_of(batch));
  const double scale = 1.0 / (static_cast<double>(adv.size()) * instances);
  double abs_sum = 0.0;
  for (double& a : adv) {
    abs_sum += std::abs(a);
    a *= scale;
  }
  rollout_backward(batch, adv, params, grads, !decoder_only);
  return abs_sum / static_cast<double>(adv.size());
}

}  // namespace

PolicyParams reinforce_gradient(std::span<const RolloutBatch> batches, const PolicyParams& params,
                                bool decoder_only) {
  PolicyParams grads = params.zeros_like();
  const int b = static_cast<int>(batches.size());
  for (const auto& batch : batches) accumulate_instance(batch, b, params, grads, decoder_only);
  return grads;
}

AdamW::AdamW(const PolicyParams& like, double lr, double weight_decay, double beta1, double beta2, double eps)
    : m_(like.zeros_like()), v_(like.zeros_like()), lr_(lr), wd_(weight_decay), beta1_(beta1),
      beta2_(beta2), eps_(eps) {}

void AdamW::step(PolicyParams& params, const PolicyParams& ascent, bool decoder_only) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  std::vector<Matrix*> p, m, v;
  std::vector<const Matrix*> g;
  std::vector<bool> frozen;
  params.visit([&](const std::string& path, Matrix& x) {
    p.push_back(&x);
    frozen.push_back(decoder_only && is_encoder_path(path));
  });
  m_.visit([&](const std::string&, Matrix& x) { m.push_back(&x); });
  v_.visit([&](const std::string&, Matrix& x) { v.push_back(&x); });
  ascent.visit([&](const std::string&, const Matrix& x) { g.push_back(&x); });
  if (p.size() != g.size() || p.size() != m.size()) throw InvariantError("optimizer layout mismatch");

  for (std::size_t k = 0; k < p.size(); ++k) {
    if (frozen[k]) continue;
    double* x = p[k]->data();
    double* mk = m[k]->data();
    double* vk = v[k]->data();
    const double* gk = g[k]->data();
    for (Eigen::Index i = 0; i < p[k]->size(); ++i) {
      const double grad = -gk[i];  // descend on the negated objective
      mk[i] = beta1_ * mk[i] + (1.0 - beta1_) * grad;
      vk[i] = beta2_ * vk[i] + (1.0 - beta2_) * grad * grad;
      const double update = (mk[i] / c1) / (std::sqrt(vk[i] / c2) + eps_);
      x[i] -= lr_ * (update + wd_ * x[i]);
    }
  }
}

int batch_task(std::uint64_t seed, int batch, int task_count) noexcept {
  RandomStream s = RandomStream(seed, "task").substream(static_cast<std::uint64_t>(batch));
  return static_cast<int>(s.below(static_cast<std::uint64_t>(task_count)));
}

std::uint64_t epoch_seed(std::uint64_t run_seed, int index) noexcept {
  return RandomStream(run_seed, "epoch").substream(static_cast<std::uint64_t>(index)).next();
}

Json epoch_metrics_to_json(const EpochMetrics& m) {
  Json j;
  j["epoch"] = m.epoch;
  j["batches"] = m.batches;
  j["instances"] = m.instances;
  j["wall_ms"] = m.wall_ms;
  Json tasks = Json::object();
  for (const auto& [name, t] : m.tasks) {
    tasks[name] = {{"batches", t.batches},
                   {"instances", t.instances},
                   {"mean_cost", t.mean_cost},
                   {"mean_abs_advantage", t.mean_abs_advantage}};
  }
  j["tasks"] = std::move(tasks);
  return j;
}

EpochMetrics train_epoch(PolicyParams& params, AdamW& optimizer, const TrainConfig& config,
                         std::uint64_t seed) {
  config.validate();
  const auto start_time = std::chrono::steady_clock::now();
  const bool decoder_only = config.finetune_mode == FinetuneMode::decoder_only;
  const int batches = (config.instances_per_epoch + config.batch_size - 1) / config.batch_size;
  const RandomStream instance_root(seed, "instances");
  const RandomStream sample_root(seed, "sampling");

  EpochMetrics metrics;
  std::map<std::string, double> cost_sum, adv_sum;
  std::map<std::string, long> traj_count;

  for (int b = 0; b < batches; ++b) {
    const std::string& task = config.tasks[batch_task(seed, b, static_cast<int>(config.tasks.size()))];
    const int size = std::min(config.batch_size, config.instances_per_epoch - b * config.batch_size);
    std::vector<double> inst_cost(size), inst_adv(size);
    std::vector<int> inst_traj(size);

    auto run_instance = [&](int i, PolicyParams& grads) {
      GenConfig gen;
      gen.n = config.n;
      gen.seed = instance_root.substream(static_cast<std::uint64_t>(b)).substream(static_cast<std::uint64_t>(i)).next();
      const Instance instance = gen_variant(task, gen);
      RolloutOptions opt;
      opt.mode = DecodeMode::sample;
      opt.n_starts = config.n_starts;
      opt.record = true;
      opt.seed = sample_root.substream(static_cast<std::uint64_t>(b)).substream(static_cast<std::uint64_t>(i)).next();
      const RolloutBatch rb = multistart_rollout(instance, params, opt, config.rules);
      inst_adv[i] = accumulate_instance(rb, size, params, grads, decoder_only);
      double c = 0.0;
      for (const auto& t : rb.trajectories) c += t.cost;
      inst_cost[i] = c;
      inst_traj[i] = static_cast<int>(rb.trajectories.size());
    };

    PolicyParams grads = params.zeros_like();
    try {
      if (config.parallel) {
        std::vector<PolicyParams> local(static_cast<std::size_t>(omp_get_max_threads()));
        std::exception_ptr error;
#pragma omp parallel
        {
          const int tid = omp_get_thread_num();
          local[tid] = params.zeros_like();
#pragma omp for schedule(static)
          for (int i = 0; i < size; ++i) {
            try {
              run_instance(i, local[tid]);
            } catch (...) {
#pragma omp critical
              if (!error) error = std::current_exception();
            }
          }
        }
        if (error) std::rethrow_exception(error);
        for (const auto& g : local)
          if (g.parameter_count() > 0) grads.axpy(1.0, g);
      } else {
        for (int i = 0; i < size; ++i) run_instance(i, grads);
      }
    } catch (const InvariantError& e) {
      throw InvariantError(fmt::format("batch {} ({}): {}", b, task, e.what()));
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("batch {} ({}): {}", b, task, e.what()));
    }
    optimizer.step(params, grads, decoder_only);

    auto& tm = metrics.tasks[task];
    ++tm.batches;
    tm.instances += size;
    for (int i = 0; i < size; ++i) {
      cost_sum[task] += inst_cost[i];
      traj_count[task] += inst_traj[i];
      adv_sum[task] += inst_adv[i];
    }
    metrics.instances += size;
    ++metrics.batches;
  }
  for (auto& [name, tm] : metrics.tasks) {
    tm.mean_cost = cost_sum[name] / static_cast<double>(traj_count[name]);
    tm.mean_abs_advantage = adv_sum[name] / tm.instances;
  }
  metrics.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_time).count();
  return metrics;
}

namespace {

void run_epochs(PolicyParams& params, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  AdamW optimizer(params, config.lr, config.weight_decay);
  for (int e = 0; e < config.epochs; ++e) {
    EpochMetrics m = train_epoch(params, optimizer, config, epoch_seed(config.seed, e));
    m.epoch = e;
    if (on_epoch) on_epoch(m);
  }
}

}  // namespace

void train(PolicyParams& params, const TrainConfig& config, const EpochCallback& on_epoch) {
  if (params.parameter_count() == 0) throw UsageError("train: parameters are not initialized");
  run_epochs(params, config, on_epoch);
}

void finetune(PolicyParams& params, const TrainConfig& config, const EpochCallback& on_epoch) {
  if (params.parameter_count() == 0 || params.parameter_count() != expected_parameter_count(params.config))
    throw UsageError("finetune: parameters are not initialized");
  if (config.finetune_mode == FinetuneMode::off) throw UsageError("finetune: mode must be decoder or full");
  run_epochs(params, config, on_epoch);
}

}  // namespace mtvrp
