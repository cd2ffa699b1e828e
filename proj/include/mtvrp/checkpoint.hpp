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

#include <filesystem>
#include <string>

#include "mtvrp/instance_io.hpp"
#include "mtvrp/policy.hpp"

namespace mtvrp {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout (little-endian):
///   "MTVRPCK1" | u32 version | u64 json_len | config JSON |
///   u32 tensor_count | per tensor: u32 name_len | name | u8 dtype (8 = f64) |
///   u32 rows | u32 cols | rows*cols doubles.
/// `metadata` is stored next to the config and is free-form.
struct Checkpoint {
  PolicyParams params;
  Json metadata = Json::object();
};

Json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const Json& json);

std::string serialize_checkpoint(const Checkpoint& checkpoint);
/// Throws IoError with the byte offset of the first malformed field.
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mtvrp
