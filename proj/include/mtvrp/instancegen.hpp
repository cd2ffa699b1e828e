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
#include <optional>
#include <string_view>

#include "mtvrp/core.hpp"

namespace mtvrp {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Generation constants. Defaults reproduce the training distribution:
/// demands in {1..9}/C, 20% backhauls, duration limit 3, horizon T = 4.6,
/// speed 1, service time and window width drawn from [0.15, 0.2].
struct GenConfig {
  int n = 20;
  std::optional<int> capacity_raw;  ///< defaults to default_capacity(n)
  double backhaul_ratio = 0.2;
  double duration_limit = 3.0;
  double tw_horizon = 4.6;
  double tw_speed = 1.0;
  Interval service_range{0.15, 0.2};
  Interval tw_width_range{0.15, 0.2};
  std::uint64_t seed = 0;
  /// Coordinates redrawn for customers whose window interval is empty.
  int tw_max_resamples = 100;

  [[nodiscard]] int capacity() const;
};

/// 40 at n = 50, 50 at n = 100, linear (rounded) in between and beyond.
int default_capacity(int n);

/// Throws UsageError if the configuration breaks its invariants.
void validate_config(const GenConfig& config);

/// CVRP with uniform coordinates and integer demands in {1..9}/C.
Instance gen_base(const GenConfig& config);

/// Service times, window widths and start-time factors per customer; the
/// start time is e_i = h_i * c_0i / v with h_i uniform in
/// [1, (T - s_i - w_i) / c_0i * v - 1], and l_i = e_i + w_i. Customers whose
/// interval is empty get their coordinate redrawn (up to tw_max_resamples).
Instance add_time_windows(Instance instance, const GenConfig& config, std::uint64_t seed);

/// Negates the demands of round(ratio * n) distinct customers (round half up).
Instance add_backhauls(Instance instance, double ratio, std::uint64_t seed);

Instance add_duration_limit(Instance instance, double limit);
Instance set_open(Instance instance);

/// Composes base -> backhauls -> time windows -> limit -> open for one of the
/// 16 canonical variants. Checks that every customer can be served by its own
/// route before returning.
Instance gen_variant(std::string_view variant, const GenConfig& config);

}  // namespace mtvrp
