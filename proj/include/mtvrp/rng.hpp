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
#include <span>
#include <string_view>

namespace mtvrp {

/// Counter-based 64-bit generator.
///
/// A stream is identified by a 64-bit key; draw i is splitmix64(key, i), so
/// streams are pure functions of (seed, path of substream names) and never
/// interact. Instance generation uses one named substream per field so that
/// toggling an attribute never shifts the draws of another attribute.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) noexcept;
  RandomStream(std::uint64_t seed, std::string_view name) noexcept;

  [[nodiscard]] RandomStream substream(std::string_view name) const noexcept;
  [[nodiscard]] RandomStream substream(std::uint64_t index) const noexcept;

  std::uint64_t next() noexcept;
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept;
  /// Uniform integer in [0, bound), unbiased. bound must be > 0.
  std::uint64_t below(std::uint64_t bound) noexcept;
  /// Uniform integer in the closed range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept;

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  [[nodiscard]] std::uint64_t key() const noexcept { return key_; }
  [[nodiscard]] std::uint64_t counter() const noexcept { return counter_; }

 private:
  RandomStream(std::uint64_t key, std::uint64_t counter, int) noexcept
      : key_(key), counter_(counter) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t hash_name(std::string_view name) noexcept;
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace mtvrp
