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

#include <cmath>

#include "doctest.h"
#include "mtvrp/errors.hpp"
#include "mtvrp/infer.hpp"
#include "mtvrp/instancegen.hpp"
#include "mtvrp/rollout.hpp"
#include "test_util.hpp"

using namespace mtvrp;

namespace {

Instance instance(std::string_view variant, int n, std::uint64_t seed) {
  GenConfig g;
  g.n = n;
  g.seed = seed;
  return gen_variant(variant, g);
}

const PolicyParams& model() {
  static const PolicyParams p = init_params(ModelConfig::micro(), 11);
  return p;
}

}  // namespace

TEST_CASE("greedy on one customer is the out-and-back tour") {
  const Instance in = testing::make_instance({{0.3, 0.4}}, {0.2});
  const SolveResult r = greedy_solve(in, model());
  CHECK(r.cost == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.solution.routes == std::vector<std::vector<int>>{{1}});
}

TEST_CASE("greedy returns the cheapest start") {
  for (auto v : {"CVRP", "OVRPBLTW", "VRPBTW"}) {
    const Instance in = instance(v, 12, 3);
    const SolveResult r = greedy_solve(in, model());
    RolloutOptions o;
    const auto b = multistart_rollout(in, model(), o);
    double best = INFINITY;
    for (const auto& t : b.trajectories) best = std::min(best, t.cost);
    CHECK(r.cost == best);
    CHECK(validate_solution(r.solution, in).feasible());
    CHECK(r.cost == doctest::Approx(solution_cost(r.solution, in)).epsilon(1e-14));
  }
}

TEST_CASE("the eight square symmetries") {
  const std::vector<Point> expected{{0.2, 0.7}, {0.7, 0.2}, {0.2, 0.3}, {0.7, 0.8},
                                    {0.8, 0.7}, {0.3, 0.2}, {0.8, 0.3}, {0.3, 0.8}};
  for (int t = 0; t < 8; ++t) {
    const Point q = transform_point({0.2, 0.7}, t);
    CHECK(q.x == doctest::Approx(expected[t].x).epsilon(1e-15));
    CHECK(q.y == doctest::Approx(expected[t].y).epsilon(1e-15));
  }
}

TEST_CASE("augmented copies share distances and everything but coordinates") {
  const Instance in = instance("OVRPBLTW", 15, 4);
  const auto copies = augment8(in);
  CHECK(copies[0].coords == in.coords);
  const auto d0 = build_distance_matrix(in);
  for (const auto& c : copies) {
    const auto d = build_distance_matrix(c);
    for (int i = 0; i < in.node_count(); ++i)
      for (int j = 0; j < in.node_count(); ++j) CHECK(std::abs(d(i, j) - d0(i, j)) <= 1e-12);
    CHECK(c.demands == in.demands);
    CHECK(c.tw_early == in.tw_early);
    CHECK(c.tw_late == in.tw_late);
    CHECK(c.attrs == in.attrs);
  }
}

TEST_CASE("augmentation keeps the mask sequence of a fixed route") {
  const Instance in = instance("VRPBLTW", 10, 5);
  RolloutOptions o;
  o.n_starts = 1;
  const auto seq = multistart_rollout(in, model(), o).trajectories[0].sequence;
  for (const auto& copy : augment8(in)) {
    const RoutingEnv a(in), b(copy);
    RolloutState sa = a.initial_state(), sb = b.initial_state();
    for (int node : seq) {
      CHECK(a.feasible_mask(sa).masked == b.feasible_mask(sb).masked);
      sa = a.step(sa, node);
      sb = b.step(sb, node);
    }
  }
}

TEST_CASE("aug8 is never worse than greedy and is feasible on the original") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Instance in = instance("OVRPTW", 10, seed);
    const SolveResult g = greedy_solve(in, model());
    const SolveResult a = solve_aug8(in, model());
    CHECK(a.cost <= g.cost);
    CHECK(a.transform >= 0);
    CHECK(a.transform < 8);
    CHECK(validate_solution(a.solution, in).feasible());
    CHECK(a.cost == doctest::Approx(solution_cost(a.solution, in)).epsilon(1e-14));
  }
}

TEST_CASE("sampling: deterministic, best-of-k nonincreasing, feasible") {
  const Instance in = instance("VRPL", 12, 6);
  InferenceConfig c;
  c.mode = DecodeMode::sample;
  c.seed = 3;
  c.samples = 1;
  const SolveResult one = sample_solve(in, model(), c);
  CHECK(sample_solve(in, model(), c).cost == one.cost);
  double last = one.cost;
  for (int k : {2, 4, 8}) {
    c.samples = k;
    const SolveResult r = sample_solve(in, model(), c);
    CHECK(r.cost <= last);
    CHECK(validate_solution(r.solution, in).feasible());
    last = r.cost;
  }
  c.samples = 0;
  CHECK_THROWS_AS(c.validate(), UsageError);
}

TEST_CASE("solve dispatches on mode and augmentation") {
  const Instance in = instance("CVRP", 8, 7);
  InferenceConfig c;
  CHECK(solve(in, model(), c).cost == greedy_solve(in, model(), c).cost);
  c.augment8 = true;
  CHECK(solve(in, model(), c).cost == solve_aug8(in, model(), c).cost);
  c.augment8 = false;
  c.mode = DecodeMode::sample;
  c.samples = 2;
  CHECK(solve(in, model(), c).cost == sample_solve(in, model(), c).cost);
}
