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

#include "mtvrp/rng.hpp"

namespace mtvrp {

namespace {
constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t hash_name(std::string_view name) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(h);
}

RandomStream::RandomStream(std::uint64_t seed) noexcept : key_(mix64(seed + kGamma)) {}

RandomStream::RandomStream(std::uint64_t seed, std::string_view name) noexcept
    : RandomStream(seed) {
  key_ = mix64(key_ ^ hash_name(name));
}

RandomStream RandomStream::substream(std::string_view name) const noexcept {
  return {mix64(key_ ^ hash_name(name)), 0, 0};
}

RandomStream RandomStream::substream(std::uint64_t index) const noexcept {
  return {mix64(key_ + mix64(index + 0x632be59bd9b4e019ULL)), 0, 0};
}

std::uint64_t RandomStream::next() noexcept {
  ++counter_;
  return mix64(key_ + counter_ * kGamma);
}

double RandomStream::uniform() noexcept {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform(double lo, double hi) noexcept {
  return lo + (hi - lo) * uniform();
}

std::uint64_t RandomStream::below(std::uint64_t bound) noexcept {
  // Lemire's nearly-divisionless rejection.
  std::uint64_t x = next();
  __uint128_t m = static_cast<__uint128_t>(x) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = -bound % bound;
    while (low < threshold) {
      x = next();
      m = static_cast<__uint128_t>(x) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

std::int64_t RandomStream::uniform_int(std::int64_t lo, std::int64_t hi) noexcept {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<std::int64_t>(below(span));
}

}  // namespace mtvrp
