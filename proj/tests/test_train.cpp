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

#include <omp.h>

#include <cmath>
#include <set>

#include "doctest.h"
#include "mtvrp/errors.hpp"
#include "mtvrp/instancegen.hpp"
#include "mtvrp/rng.hpp"
#include "mtvrp/rollout.hpp"
#include "mtvrp/train.hpp"
#include "reference_model.hpp"

using namespace mtvrp;

namespace {

Instance instance(std::string_view variant, int n, std::uint64_t seed) {
  GenConfig g;
  g.n = n;
  g.seed = seed;
  return gen_variant(variant, g);
}

std::vector<double> flatten(const PolicyParams& p) {
  std::vector<double> out;
  p.visit([&](const std::string&, const Matrix& m) { out.insert(out.end(), m.data(), m.data() + m.size()); });
  return out;
}

TrainConfig small_config() {
  TrainConfig c;
  c.tasks = {"CVRP"};
  c.n = 5;
  c.instances_per_epoch = 4;
  c.batch_size = 2;
  c.epochs = 1;
  c.seed = 3;
  c.parallel = false;
  return c;
}

}  // namespace

TEST_CASE("multistart rollout: distinct starts, feasible, greedy is deterministic") {
  const Instance in = instance("CVRP", 4, 1);
  const auto p = init_params(ModelConfig::micro(), 2);
  RolloutOptions opt;
  opt.n_starts = 4;
  const RolloutBatch b = multistart_rollout(in, p, opt);
  REQUIRE(b.trajectories.size() == 4);
  std::set<int> starts;
  for (const auto& t : b.trajectories) {
    starts.insert(t.start);
    CHECK(t.sequence.front() == t.start);
    CHECK(validate_solution(t.solution, in).feasible());
    CHECK(t.cost == doctest::Approx(solution_cost(t.solution, in)).epsilon(1e-14));
    CHECK(t.log_prob <= 0.0);
  }
  CHECK(starts == std::set<int>{1, 2, 3, 4});
  const RolloutBatch again = multistart_rollout(in, p, opt);
  for (std::size_t i = 0; i < 4; ++i) CHECK(again.trajectories[i].sequence == b.trajectories[i].sequence);
}

TEST_CASE("multistart rollout skips infeasible starts and rejects instances with none") {
  Instance in = instance("VRPTW", 6, 4);
  in.tw_early[2] = 4.5;
  in.tw_late[2] = 4.55;  // start 2 cannot make it back to the depot
  in.service[2] = 0.15;
  const auto p = init_params(ModelConfig::micro(), 2);
  const RoutingEnv env(in);
  const auto starts = feasible_starts(env, 6);
  CHECK(std::find(starts.begin(), starts.end(), 2) == starts.end());
  CHECK(feasible_starts(env, 2) == std::vector<int>{1, 3});
  for (int i = 1; i <= 6; ++i) {
    in.tw_early[i] = 4.5;
    in.tw_late[i] = 4.55;
    in.service[i] = 0.15;
  }
  CHECK(feasible_starts(RoutingEnv(in), 6).empty());
  CHECK_THROWS_AS((void)multistart_rollout(in, p, RolloutOptions{}), ValidationError);
}

TEST_CASE("sample mode is reproducible per seed") {
  const Instance in = instance("OVRPBLTW", 10, 6);
  const auto p = init_params(ModelConfig::micro(), 2);
  RolloutOptions opt;
  opt.mode = DecodeMode::sample;
  opt.seed = 9;
  const auto a = multistart_rollout(in, p, opt);
  const auto b = multistart_rollout(in, p, opt);
  for (std::size_t i = 0; i < a.trajectories.size(); ++i) {
    CHECK(a.trajectories[i].sequence == b.trajectories[i].sequence);
    CHECK(validate_solution(a.trajectories[i].solution, in).feasible());
    CHECK(a.trajectories[i].log_prob ==
          doctest::Approx(sequence_log_prob(in, a.trajectories[i].sequence, p)).epsilon(1e-10));
  }
}

TEST_CASE("shared baseline and advantages") {
  const std::vector<double> r{-1, -2, -3};
  CHECK(shared_baseline(r) == -2.0);
  CHECK(advantages(r) == std::vector<double>{1, 0, -1});
  CHECK(advantages(std::vector<double>{-4.2}) == std::vector<double>{0.0});
  RandomStream s(5);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> rs(1 + s.below(100));
    for (auto& x : rs) x = -s.uniform(0.0, 50.0);
    CHECK(std::abs(compensated_sum(advantages(rs))) <= 1e-12);
  }
  // 1e16 + 1 - 1e16 loses the 1 in plain summation.
  CHECK(compensated_sum(std::vector<double>{1e16, 1.0, -1e16}) == 1.0);
}

TEST_CASE("reinforce gradient: zero for equal rewards, linear in advantages, greedy rejected") {
  const Instance in = instance("CVRP", 5, 2);
  const auto p = init_params(ModelConfig::micro(), 4);
  RolloutOptions opt;
  opt.mode = DecodeMode::sample;
  opt.seed = 1;
  opt.record = true;
  std::vector<RolloutBatch> batches{multistart_rollout(in, p, opt)};

  const auto g = reinforce_gradient(batches, p);
  auto doubled = batches;
  for (auto& t : doubled[0].trajectories) t.cost *= 2;
  const auto g2 = reinforce_gradient(doubled, p);
  const auto a = flatten(g), b = flatten(g2);
  double norm = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(b[i] == doctest::Approx(2 * a[i]).epsilon(1e-12).scale(1e-12));
    norm += a[i] * a[i];
  }
  CHECK(norm > 0);

  auto equal = batches;
  for (auto& t : equal[0].trajectories) t.cost = 3.25;
  for (double x : flatten(reinforce_gradient(equal, p))) CHECK(x == 0.0);

  RolloutOptions greedy = opt;
  greedy.mode = DecodeMode::greedy;
  std::vector<RolloutBatch> gb{multistart_rollout(in, p, greedy)};
  CHECK_THROWS_AS((void)reinforce_gradient(gb, p), UsageError);
}

TEST_CASE("reinforce gradient matches the estimator on a two-customer toy") {
  // d = 2, one head: sum_j (R_j - b) / (n B) * grad log p, with grad log p from
  // central differences of the independent long-double forward pass.
  ModelConfig cfg;
  cfg.embed_dim = 2;
  cfg.n_layers = 1;
  cfg.n_heads = 1;
  cfg.ff_hidden = 4;
  cfg.norm = NormMode::none;
  const auto p = init_params(cfg, 8);
  std::vector<RolloutBatch> batches;
  std::vector<Instance> instances{instance("CVRP", 2, 1), instance("VRPTW", 2, 2)};
  for (std::size_t i = 0; i < instances.size(); ++i) {
    RolloutOptions opt;
    opt.mode = DecodeMode::sample;
    opt.seed = 20 + i;
    opt.record = true;
    batches.push_back(multistart_rollout(instances[i], p, opt));
  }
  const auto g = reinforce_gradient(batches, p);

  std::vector<Matrix> expected;
  p.visit([&](const std::string&, const Matrix& m) { expected.push_back(Matrix::Zero(m.rows(), m.cols())); });
  const double B = 2.0;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    const auto& ts = batches[i].trajectories;
    const double n = static_cast<double>(ts.size());
    double b = 0;
    for (const auto& t : ts) b -= t.cost / n;
    for (const auto& t : ts) {
      const auto fd = testing::reference_gradient(instances[i], t.sequence, p, 1e-6);
      for (std::size_t k = 0; k < fd.size(); ++k) expected[k] += (-t.cost - b) / (n * B) * fd[k];
    }
  }
  std::size_t k = 0;
  g.visit([&](const std::string& name, const Matrix& m) {
    INFO(name);
    CHECK((m - expected[k]).norm() <= 1e-8 * std::max(1.0, expected[k].norm()));
    ++k;
  });
}

TEST_CASE("AdamW: first step moves each coordinate by lr along the ascent sign") {
  auto p = init_params(ModelConfig::micro(), 1);
  const auto before = flatten(p);
  auto ascent = p.zeros_like();
  RandomStream s(2);
  ascent.visit([&](const std::string&, Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = s.uniform(-1.0, 1.0);
  });
  AdamW opt(p, 0.01, 0.0);
  opt.step(p, ascent);
  const auto after = flatten(p), g = flatten(ascent);
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(after[i] - before[i] == doctest::Approx(0.01 * g[i] / (std::abs(g[i]) + 1e-8)).epsilon(1e-9));

  // Decoupled decay alone shrinks by lr * wd.
  auto q = init_params(ModelConfig::micro(), 1);
  AdamW decay(q, 0.1, 0.5);
  decay.step(q, q.zeros_like());
  const auto shrunk = flatten(q);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(shrunk[i] == doctest::Approx(before[i] * 0.95).epsilon(1e-14));
}

TEST_CASE("decoder-only steps leave the encoder untouched") {
  auto p = init_params(ModelConfig::micro(), 1);
  const auto enc = p.checksum("encoder.");
  const auto dec = p.checksum("decoder.");
  auto ascent = p.zeros_like();
  ascent.visit([](const std::string&, Matrix& m) { m.setConstant(0.5); });
  AdamW opt(p, 0.01, 0.1);
  opt.step(p, ascent, true);
  CHECK(p.checksum("encoder.") == enc);
  CHECK(p.checksum("decoder.") != dec);
}

TEST_CASE("train_epoch consumes ceil(instances / B) batches") {
  auto p = init_params(ModelConfig::micro(), 1);
  auto cfg = small_config();
  AdamW opt(p, cfg.lr, cfg.weight_decay);
  const EpochMetrics m = train_epoch(p, opt, cfg, 5);
  CHECK(m.batches == 2);
  CHECK(m.instances == 4);
  REQUIRE(m.tasks.count("CVRP") == 1);
  CHECK(m.tasks.at("CVRP").instances == 4);
  CHECK(m.tasks.at("CVRP").mean_cost > 0);
  CHECK(opt.steps() == 2);

  cfg.instances_per_epoch = 5;
  const EpochMetrics odd = train_epoch(p, opt, cfg, 5);
  CHECK(odd.batches == 3);
  CHECK(odd.instances == 5);
}

TEST_CASE("seeded training is reproducible, and the parallel path agrees with the serial one") {
  auto cfg = small_config();
  cfg.tasks = {"CVRP", "OVRPTW", "VRPBL"};
  cfg.instances_per_epoch = 6;
  cfg.epochs = 2;
  std::vector<std::string> lines_a, lines_b;
  auto a = init_params(ModelConfig::micro(), 1);
  auto b = init_params(ModelConfig::micro(), 1);
  train(a, cfg, [&](const EpochMetrics& m) {
    auto j = epoch_metrics_to_json(m);
    j.erase("wall_ms");
    lines_a.push_back(j.dump());
  });
  train(b, cfg, [&](const EpochMetrics& m) {
    auto j = epoch_metrics_to_json(m);
    j.erase("wall_ms");
    lines_b.push_back(j.dump());
  });
  CHECK(lines_a == lines_b);
  CHECK(a.checksum() == b.checksum());

  auto par = init_params(ModelConfig::micro(), 1);
  cfg.parallel = true;
  const int threads = omp_get_max_threads();
  omp_set_num_threads(3);
  train(par, cfg);
  omp_set_num_threads(threads);
  const auto x = flatten(a), y = flatten(par);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-9).scale(1e-9));
}

TEST_CASE("batch tasks are uniform") {
  std::vector<int> counts(5, 0);
  for (int b = 0; b < 1000; ++b) ++counts[batch_task(77, b, 5)];
  double chi2 = 0;
  for (int c : counts) chi2 += (c - 200.0) * (c - 200.0) / 200.0;
  CHECK(chi2 < 18.47);  // 4 degrees of freedom, p = 0.001
  CHECK(batch_task(77, 3, 5) == batch_task(77, 3, 5));
}

TEST_CASE("fine-tuning") {
  CHECK(TrainConfig::finetune_defaults(FinetuneMode::full).epochs == 200);
  CHECK(TrainConfig::finetune_defaults(FinetuneMode::full).lr == 1e-5);
  CHECK(finetune_mode_from_string("decoder") == FinetuneMode::decoder_only);
  CHECK_THROWS_AS((void)finetune_mode_from_string("encoder"), UsageError);

  auto cfg = small_config();
  cfg.epochs = 3;
  cfg.finetune_mode = FinetuneMode::decoder_only;
  auto p = init_params(ModelConfig::micro(), 1);
  const auto enc = p.checksum("encoder."), dec = p.checksum("decoder.");
  finetune(p, cfg);
  CHECK(p.checksum("encoder.") == enc);
  CHECK(p.checksum("decoder.") != dec);

  cfg.finetune_mode = FinetuneMode::full;
  cfg.lr = 0.0;
  auto q = init_params(ModelConfig::micro(), 1);
  const auto all = q.checksum();
  finetune(q, cfg);
  CHECK(q.checksum() == all);

  PolicyParams empty;
  CHECK_THROWS_AS(finetune(empty, cfg), UsageError);
  cfg.finetune_mode = FinetuneMode::off;
  CHECK_THROWS_AS(finetune(q, cfg), UsageError);
}

TEST_CASE("config validation") {
  TrainConfig c = small_config();
  c.tasks.clear();
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = small_config();
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = small_config();
  c.n_starts = 6;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = small_config();
  c.tasks = {"CVRPX"};
  CHECK_THROWS_AS(c.validate(), UsageError);
}

TEST_CASE("REINFORCE on a fixed two-customer instance does not worsen greedy cost") {
  const Instance in = instance("CVRP", 2, 31);
  auto p = init_params(ModelConfig::micro(), 5);
  auto greedy_cost = [&](const PolicyParams& q) {
    RolloutOptions o;
    return multistart_rollout(in, q, o).trajectories.front().cost;
  };
  const double initial = greedy_cost(p);
  AdamW opt(p, 1e-3, 0.0);
  for (int it = 0; it < 500; ++it) {
    RolloutOptions o;
    o.mode = DecodeMode::sample;
    o.seed = static_cast<std::uint64_t>(it);
    o.record = true;
    std::vector<RolloutBatch> b{multistart_rollout(in, p, o)};
    opt.step(p, reinforce_gradient(b, p));
  }
  CHECK(greedy_cost(p) <= initial + 1e-12);
}
