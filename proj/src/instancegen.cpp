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

#include "mtvrp/instancegen.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numeric>

#include "mtvrp/errors.hpp"
#include "mtvrp/rng.hpp"

namespace mtvrp {

int default_capacity(int n) {
  return std::max(9, static_cast<int>(std::lround(30.0 + n / 5.0)));
}

int GenConfig::capacity() const { return capacity_raw.value_or(default_capacity(n)); }

void validate_config(const GenConfig& c) {
  if (c.n < 1) throw UsageError("customer count must be at least 1");
  if (c.capacity() < 9) throw UsageError("raw capacity must be at least 9 so every demand fits");
  if (c.backhaul_ratio < 0.0 || c.backhaul_ratio > 1.0)
    throw UsageError("backhaul ratio must lie in [0, 1]");
  if (c.service_range.lo > c.service_range.hi || c.tw_width_range.lo > c.tw_width_range.hi)
    throw UsageError("interval low bound exceeds high bound");
  if (c.service_range.lo < 0.0 || c.tw_width_range.lo <= 0.0)
    throw UsageError("service times must be nonnegative and window widths positive");
  if (!(c.tw_horizon > 0.0) || !(c.tw_speed > 0.0)) throw UsageError("horizon and speed must be positive");
}

Instance gen_base(const GenConfig& config) {
  validate_config(config);
  const RandomStream root(config.seed);
  RandomStream coords = root.substream("coords");
  RandomStream demands = root.substream("demands");
  const double cap = config.capacity();

  Instance in;
  in.seed = config.seed;
  in.name = fmt::format("CVRP-n{}-s{}", config.n, config.seed);
  in.coords.resize(static_cast<std::size_t>(config.n) + 1);
  in.demands.assign(static_cast<std::size_t>(config.n) + 1, 0.0);
  for (auto& p : in.coords) {
    p.x = coords.uniform();
    p.y = coords.uniform();
  }
  for (int i = 1; i <= config.n; ++i)
    in.demands[i] = static_cast<double>(demands.uniform_int(1, 9)) / cap;
  return in;
}

Instance add_time_windows(Instance in, const GenConfig& config, std::uint64_t seed) {
  const RandomStream root = RandomStream(seed).substream("tw");
  const int nodes = in.node_count();
  const double horizon = config.tw_horizon;
  const double v = config.tw_speed;
  in.tw_early.assign(nodes, 0.0);
  in.tw_late.assign(nodes, 0.0);
  in.service.assign(nodes, 0.0);
  in.tw_late[0] = horizon;

  for (int i = 1; i < nodes; ++i) {
    RandomStream draw = root.substream(static_cast<std::uint64_t>(i));
    RandomStream relocate = draw.substream("relocate");
    const double s = draw.uniform(config.service_range.lo, config.service_range.hi);
    const double width = draw.uniform(config.tw_width_range.lo, config.tw_width_range.hi);
    const double u = draw.uniform();
    for (int attempt = 0;; ++attempt) {
      const double c0i = euclidean_distance(in.coords[0], in.coords[i]);
      if (c0i <= 0.0) {
        in.tw_early[i] = 0.0;
        break;
      }
      const double h_hi = (horizon - s - width) / c0i * v - 1.0;
      if (h_hi >= 1.0) {
        const double h = 1.0 + (h_hi - 1.0) * u;
        in.tw_early[i] = h * c0i / v;
        break;
      }
      if (attempt >= config.tw_max_resamples)
        throw ValidationError(fmt::format(
            "customer {} cannot receive a time window: depot distance {} too large for horizon {}", i,
            c0i, horizon));
      in.coords[i] = {relocate.uniform(), relocate.uniform()};
    }
    in.service[i] = s;
    in.tw_late[i] = in.tw_early[i] + width;
  }
  in.depot_horizon = horizon;
  in.speed = v;
  in.attrs.time_windows = true;
  return in;
}

Instance add_backhauls(Instance in, double ratio, std::uint64_t seed) {
  const int n = in.customer_count();
  const auto count = static_cast<int>(std::floor(ratio * n + 0.5));
  if (count < 1)
    throw UsageError(fmt::format("backhaul ratio {} selects no customer out of {}", ratio, n));
  RandomStream pick = RandomStream(seed).substream("backhaul");
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 1);
  // Partial Fisher-Yates: the first `count` slots are a uniform sample.
  for (int k = 0; k < count; ++k) {
    const auto j = k + static_cast<int>(pick.below(static_cast<std::uint64_t>(n - k)));
    std::swap(order[k], order[j]);
    in.demands[order[k]] = -std::abs(in.demands[order[k]]);
  }
  in.attrs.backhaul = true;
  return in;
}

Instance add_duration_limit(Instance in, double limit) {
  if (!(limit > 0.0)) throw UsageError(fmt::format("duration limit must be positive, got {}", limit));
  in.duration_limit = limit;
  in.attrs.duration_limit = true;
  return in;
}

Instance set_open(Instance in) {
  in.attrs.open = true;
  return in;
}

Instance gen_variant(std::string_view variant, const GenConfig& config) {
  const AttributeSet attrs = AttributeSet::from_variant(variant);
  Instance in = gen_base(config);
  if (attrs.backhaul) in = add_backhauls(std::move(in), config.backhaul_ratio, config.seed);
  if (attrs.time_windows) in = add_time_windows(std::move(in), config, config.seed);
  if (attrs.duration_limit) in = add_duration_limit(std::move(in), config.duration_limit);
  if (attrs.open) in = set_open(std::move(in));
  in.name = fmt::format("{}-n{}-s{}", in.attrs.variant_name(), config.n, config.seed);

  validate_instance(in);
  Solution singletons{{}, in.name};
  for (int i = 1; i <= in.customer_count(); ++i) singletons.routes.push_back({i});
  const Verdict v = validate_solution(singletons, in);
  if (!v.feasible())
    throw ValidationError(fmt::format("generated instance '{}' cannot serve customer {} alone: {}", in.name,
                                      v.node, v.message));
  return in;
}

}  // namespace mtvrp
