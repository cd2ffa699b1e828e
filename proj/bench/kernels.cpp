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

// Serial reference path vs the OpenMP path for the two batch kernels:
// one training epoch and the evaluation sweep.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "mtvrp/bench.hpp"
#include "mtvrp/train.hpp"

using namespace mtvrp;

namespace {

void train_epoch_kernel(benchmark::State& state, bool parallel) {
  TrainConfig c;
  c.tasks = {"CVRP", "VRPTW"};
  c.n = static_cast<int>(state.range(0));
  c.instances_per_epoch = 64;
  c.batch_size = 32;
  c.parallel = parallel;
  PolicyParams p = init_params(ModelConfig::tiny(), 1);
  AdamW opt(p, c.lr, c.weight_decay);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    auto m = train_epoch(p, opt, c, ++seed);
    benchmark::DoNotOptimize(m);
  }
  state.SetItemsProcessed(state.iterations() * c.instances_per_epoch);
  state.counters["threads"] = parallel ? omp_get_max_threads() : 1;
}

void eval_kernel(benchmark::State& state, bool parallel) {
  const PolicyParams p = init_params(ModelConfig::tiny(), 1);
  EvalConfig c;
  c.variants = {"CVRP", "OVRPTW"};
  c.n = static_cast<int>(state.range(0));
  c.count = 16;
  c.solvers = {"ni", "greedy"};
  c.parallel = parallel;
  for (auto _ : state) {
    auto r = eval_suite(&p, c);
    benchmark::DoNotOptimize(r);
  }
  state.SetItemsProcessed(state.iterations() * c.count * 2);
  state.counters["threads"] = parallel ? omp_get_max_threads() : 1;
}

}  // namespace

BENCHMARK_CAPTURE(train_epoch_kernel, serial, false)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(train_epoch_kernel, openmp, true)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(eval_kernel, serial, false)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(eval_kernel, openmp, true)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
