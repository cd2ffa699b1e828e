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

#include "mtvrp/infer.hpp"

#include "mtvrp/errors.hpp"
#include "mtvrp/rng.hpp"

namespace mtvrp {

void InferenceConfig::validate() const {
  if (mode == DecodeMode::forced) throw UsageError("inference mode must be greedy or sample");
  if (mode == DecodeMode::sample && samples < 1) throw UsageError("samples must be >= 1");
  if (n_starts < 0) throw UsageError("n_starts must be >= 0");
}

SolveResult greedy_solve(const Instance& instance, const PolicyParams& params, const InferenceConfig& config) {
  RolloutOptions opt;
  opt.mode = DecodeMode::greedy;
  opt.n_starts = config.n_starts;
  const RolloutBatch batch = multistart_rollout(instance, params, opt, config.rules);
  const auto& best = batch.trajectories[batch.best_index()];
  return {best.solution, best.cost, 0};
}

Point transform_point(Point p, int t) noexcept {
  const double x = p.x;
  const double y = p.y;
  switch (t) {
    case 0: return {x, y};
    case 1: return {y, x};
    case 2: return {x, 1.0 - y};
    case 3: return {y, 1.0 - x};
    case 4: return {1.0 - x, y};
    case 5: return {1.0 - y, x};
    case 6: return {1.0 - x, 1.0 - y};
    default: return {1.0 - y, 1.0 - x};
  }
}

std::array<Instance, 8> augment8(const Instance& instance) {
  std::array<Instance, 8> out;
  for (int t = 0; t < 8; ++t) {
    out[t] = instance;
    for (auto& p : out[t].coords) p = transform_point(p, t);
  }
  return out;
}

SolveResult solve_aug8(const Instance& instance, const PolicyParams& params, const InferenceConfig& config) {
  const auto copies = augment8(instance);
  SolveResult best;
  for (int t = 0; t < 8; ++t) {
    SolveResult r = config.mode == DecodeMode::sample ? sample_solve(copies[t], params, config)
                                                      : greedy_solve(copies[t], params, config);
    // Compare on the original geometry so the identity copy's cost is exact.
    r.cost = solution_cost(r.solution, instance);
    r.transform = t;
    if (t == 0 || r.cost < best.cost) best = std::move(r);
  }
  best.solution.instance_id = instance.name;
  return best;
}

SolveResult sample_solve(const Instance& instance, const PolicyParams& params, const InferenceConfig& config) {
  config.validate();
  const RandomStream root(config.seed, "sample_solve");
  SolveResult best;
  bool have = false;
  for (int k = 0; k < config.samples; ++k) {
    RolloutOptions opt;
    opt.mode = DecodeMode::sample;
    opt.n_starts = config.n_starts;
    opt.seed = root.substream(static_cast<std::uint64_t>(k)).next();
    const RolloutBatch batch = multistart_rollout(instance, params, opt, config.rules);
    const auto& t = batch.trajectories[batch.best_index()];
    if (!have || t.cost < best.cost) {
      best = {t.solution, t.cost, 0};
      have = true;
    }
  }
  return best;
}

SolveResult solve(const Instance& instance, const PolicyParams& params, const InferenceConfig& config) {
  config.validate();
  if (config.augment8) return solve_aug8(instance, params, config);
  if (config.mode == DecodeMode::sample) return sample_solve(instance, params, config);
  return greedy_solve(instance, params, config);
}

}  // namespace mtvrp
