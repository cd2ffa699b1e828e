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

#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "mtvrp/errors.hpp"
#include "mtvrp/instance_io.hpp"
#include "mtvrp/instancegen.hpp"

using namespace mtvrp;

namespace {

GenConfig config(int n, std::uint64_t seed) {
  GenConfig g;
  g.n = n;
  g.seed = seed;
  return g;
}

bool is_integer_demand(double d, int capacity) {
  const double raw = std::abs(d) * capacity;
  return std::abs(raw - std::round(raw)) < 1e-12 && std::round(raw) >= 1 && std::round(raw) <= 9;
}

}  // namespace

TEST_CASE("default capacity anchors") {
  CHECK(default_capacity(50) == 40);
  CHECK(default_capacity(100) == 50);
  CHECK(default_capacity(75) == 45);
  CHECK(default_capacity(20) == 34);
  CHECK(config(50, 0).capacity() == 40);
  GenConfig g = config(50, 0);
  g.capacity_raw = 30;
  CHECK(g.capacity() == 30);
}

TEST_CASE("config validation") {
  GenConfig g = config(0, 0);
  CHECK_THROWS_AS(validate_config(g), UsageError);
  g = config(5, 0);
  g.capacity_raw = 8;
  CHECK_THROWS_AS(validate_config(g), UsageError);
  g = config(5, 0);
  g.backhaul_ratio = 1.5;
  CHECK_THROWS_AS(validate_config(g), UsageError);
  g = config(5, 0);
  g.service_range = {0.3, 0.2};
  CHECK_THROWS_AS(validate_config(g), UsageError);
}

TEST_CASE("gen_base: demand range, coordinates and determinism") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Instance in = gen_base(config(1, seed));
    CHECK(in.customer_count() == 1);
    CHECK(is_integer_demand(in.demands[1], default_capacity(1)));
  }
  GenConfig g = config(100, 3);
  g.capacity_raw = 50;
  const Instance big = gen_base(g);
  CHECK(big.demands[0] == 0.0);
  for (int i = 1; i <= 100; ++i) {
    CHECK(big.demands[i] <= 0.18 + 1e-15);
    CHECK(is_integer_demand(big.demands[i], 50));
    CHECK(big.coords[i].x >= 0.0);
    CHECK(big.coords[i].x <= 1.0);
    CHECK(big.coords[i].y >= 0.0);
    CHECK(big.coords[i].y <= 1.0);
  }
  CHECK(big.attrs == AttributeSet{});
  CHECK(instance_to_string(gen_base(g)) == instance_to_string(big));
  g.seed = 4;
  CHECK(instance_to_string(gen_base(g)) != instance_to_string(big));
}

TEST_CASE("time windows follow the start-time formula") {
  // c_0i = 0.5, s = w = 0.2, T = 4.6, v = 1: h in [1, 7.4], e in [0.5, 3.7].
  Instance in;
  in.name = "tw";
  in.coords = {{0.0, 0.0}, {0.3, 0.4}};
  in.demands = {0.0, 0.1};
  GenConfig g = config(1, 0);
  g.service_range = {0.2, 0.2};
  g.tw_width_range = {0.2, 0.2};
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Instance tw = add_time_windows(in, g, seed);
    CHECK(tw.attrs.time_windows);
    CHECK(tw.tw_early[1] >= 0.5 - 1e-12);
    CHECK(tw.tw_early[1] <= 3.7 + 1e-12);
    CHECK(tw.tw_late[1] == doctest::Approx(tw.tw_early[1] + 0.2).epsilon(1e-14));
    CHECK(tw.service[1] == 0.2);
    CHECK(tw.tw_early[0] == 0.0);
    CHECK(tw.tw_late[0] == 4.6);
    CHECK(tw.depot_horizon == 4.6);
  }
}

TEST_CASE("VRPTW bounds hold for every customer") {
  const Instance in = gen_variant("VRPTW", config(50, 8));
  for (int i = 1; i <= 50; ++i) {
    const double c0 = euclidean_distance(in.coords[0], in.coords[i]);
    CHECK(in.tw_early[i] >= c0 / in.speed - 1e-12);
    CHECK(in.tw_early[i] < in.tw_late[i]);
    CHECK(in.tw_late[i] <= in.depot_horizon);
    CHECK(in.tw_late[i] + in.service[i] + c0 / in.speed <= 4.6 + 1e-12);
    const double w = in.tw_late[i] - in.tw_early[i];
    CHECK(w >= 0.15 - 1e-12);
    CHECK(w <= 0.2 + 1e-12);
  }
}

TEST_CASE("empty window intervals are resampled or rejected") {
  Instance in;
  in.name = "far";
  in.coords = {{0.0, 0.0}, {1.0, 1.0}};
  in.demands = {0.0, 0.1};
  GenConfig g = config(1, 0);
  g.tw_horizon = 2.0;  // (2 - 0.4) / 1.414 - 1 < 1
  g.service_range = {0.2, 0.2};
  g.tw_width_range = {0.2, 0.2};
  const Instance fixed = add_time_windows(in, g, 1);
  const double c0 = euclidean_distance(fixed.coords[0], fixed.coords[1]);
  CHECK(fixed.tw_late[1] + 0.2 + c0 <= 2.0 + 1e-12);
  g.tw_max_resamples = 0;
  CHECK_THROWS_AS((void)add_time_windows(in, g, 1), ValidationError);
}

TEST_CASE("backhauls") {
  const Instance base5 = gen_base(config(5, 2));
  const Instance b5 = add_backhauls(base5, 0.2, 3);
  CHECK(std::count_if(b5.demands.begin(), b5.demands.end(), [](double d) { return d < 0; }) == 1);
  CHECK(b5.attrs.backhaul);

  const Instance base = gen_base(config(50, 2));
  const Instance b = add_backhauls(base, 0.2, 3);
  CHECK(std::count_if(b.demands.begin(), b.demands.end(), [](double d) { return d < 0; }) == 10);
  for (int i = 0; i <= 50; ++i) CHECK(std::abs(b.demands[i]) == base.demands[i]);

  CHECK_THROWS_AS((void)add_backhauls(base5, 0.0, 3), UsageError);
  CHECK_THROWS_AS((void)add_backhauls(base5, 0.05, 3), UsageError);
  // 0.1 * 5 = 0.5 rounds half up to 1.
  const Instance half = add_backhauls(base5, 0.1, 3);
  CHECK(std::count_if(half.demands.begin(), half.demands.end(), [](double d) { return d < 0; }) == 1);
}

TEST_CASE("duration limit and open routes") {
  const Instance base = gen_base(config(5, 2));
  const Instance l = add_duration_limit(base, 3.0);
  CHECK(l.attrs.duration_limit);
  CHECK(l.duration_limit == 3.0);
  CHECK(l.attrs.variant_name() == "VRPL");
  CHECK_THROWS_AS((void)add_duration_limit(base, -1.0), UsageError);
  CHECK_THROWS_AS((void)add_duration_limit(base, 0.0), UsageError);
  const Instance o = set_open(base);
  CHECK(instance_to_string(set_open(o)) == instance_to_string(o));
  CHECK(o.attrs.open);
}

TEST_CASE("gen_variant composes attributes") {
  CHECK(gen_variant("CVRP", config(10, 1)).attrs == AttributeSet{});
  const Instance all = gen_variant("OVRPBLTW", config(10, 1));
  CHECK(all.attrs.time_windows);
  CHECK(all.attrs.open);
  CHECK(all.attrs.backhaul);
  CHECK(all.attrs.duration_limit);
  CHECK_THROWS_AS((void)gen_variant("VRPZ", config(10, 1)), UsageError);
  for (auto v : all_variants()) {
    const Instance in = gen_variant(v, config(20, 7));
    CHECK(in.attrs.variant_name() == v);
    Solution singles;
    for (int i = 1; i <= 20; ++i) singles.routes.push_back({i});
    CHECK(validate_solution(singles, in).feasible());
  }
}

TEST_CASE("adding an attribute leaves other draws untouched") {
  const Instance cvrp = gen_variant("CVRP", config(20, 5));
  const Instance vrpl = gen_variant("VRPL", config(20, 5));
  const Instance vrpb = gen_variant("VRPB", config(20, 5));
  const Instance vrpbtw = gen_variant("VRPBTW", config(20, 5));
  CHECK(cvrp.coords == vrpl.coords);
  CHECK(cvrp.demands == vrpl.demands);
  CHECK(cvrp.coords == vrpb.coords);
  for (int i = 0; i <= 20; ++i) CHECK(std::abs(vrpb.demands[i]) == cvrp.demands[i]);
  CHECK(vrpb.demands == vrpbtw.demands);
}
