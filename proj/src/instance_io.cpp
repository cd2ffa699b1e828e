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

#include "mtvrp/instance_io.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

#include "mtvrp/errors.hpp"

namespace mtvrp {

Json instance_to_json(const Instance& in) {
  Json j;
  j["name"] = in.name;
  j["n"] = in.customer_count();
  j["attrs"] = {{"tw", in.attrs.time_windows},
                {"open", in.attrs.open},
                {"backhaul", in.attrs.backhaul},
                {"limit", in.attrs.duration_limit}};
  Json coords = Json::array();
  for (const auto& p : in.coords) coords.push_back({p.x, p.y});
  j["coords"] = std::move(coords);
  j["demands"] = in.demands;
  if (in.attrs.time_windows) {
    j["tw_early"] = in.tw_early;
    j["tw_late"] = in.tw_late;
    j["service"] = in.service;
  }
  j["capacity"] = in.capacity;
  if (in.attrs.duration_limit && in.duration_limit) j["duration_limit"] = *in.duration_limit;
  if (in.attrs.time_windows) j["depot_horizon"] = in.depot_horizon;
  j["speed"] = in.speed;
  j["seed"] = in.seed;
  return j;
}

Instance instance_from_json(const Json& j) {
  try {
    Instance in;
    in.name = j.at("name").get<std::string>();
    const auto& attrs = j.at("attrs");
    in.attrs.time_windows = attrs.at("tw").get<bool>();
    in.attrs.open = attrs.at("open").get<bool>();
    in.attrs.backhaul = attrs.at("backhaul").get<bool>();
    in.attrs.duration_limit = attrs.at("limit").get<bool>();
    for (const auto& p : j.at("coords")) {
      if (p.size() != 2) throw ValidationError("coordinate entries must be [x, y] pairs");
      in.coords.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    in.demands = j.at("demands").get<std::vector<double>>();
    if (in.attrs.time_windows) {
      in.tw_early = j.at("tw_early").get<std::vector<double>>();
      in.tw_late = j.at("tw_late").get<std::vector<double>>();
      in.service = j.at("service").get<std::vector<double>>();
      in.depot_horizon = j.at("depot_horizon").get<double>();
    }
    in.capacity = j.at("capacity").get<double>();
    if (in.attrs.duration_limit) in.duration_limit = j.at("duration_limit").get<double>();
    in.speed = j.value("speed", 1.0);
    in.seed = j.value("seed", std::uint64_t{0});
    const int n = j.at("n").get<int>();
    if (n != in.customer_count())
      throw ValidationError(fmt::format("n = {} but {} customer coordinates", n, in.customer_count()));
    return in;
  } catch (const Json::exception& e) {
    throw ValidationError(fmt::format("malformed instance JSON: {}", e.what()));
  }
}

std::string instance_to_string(const Instance& instance) { return instance_to_json(instance).dump(); }

void write_json(const Json& json, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  out << json.dump(2) << '\n';
  if (!out) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return Json::parse(buffer.str());
  } catch (const Json::parse_error& e) {
    throw IoError(fmt::format("'{}' is not valid JSON (byte {}): {}", path.string(), e.byte, e.what()));
  }
}

void write_instance(const Instance& instance, const std::filesystem::path& path) {
  write_json(instance_to_json(instance), path);
}

Instance read_instance(const std::filesystem::path& path) {
  Instance in = instance_from_json(read_json(path));
  validate_instance(in);
  return in;
}

Json solution_to_json(const SolutionRecord& record) {
  Json j;
  j["routes"] = record.solution.routes;
  j["cost"] = record.cost;
  j["variant"] = record.variant;
  j["wall_ms"] = record.wall_ms;
  return j;
}

SolutionRecord solution_from_json(const Json& j) {
  try {
    SolutionRecord r;
    r.solution.routes = j.at("routes").get<std::vector<std::vector<int>>>();
    r.cost = j.at("cost").get<double>();
    r.variant = j.value("variant", std::string{});
    r.wall_ms = j.value("wall_ms", 0.0);
    return r;
  } catch (const Json::exception& e) {
    throw ValidationError(fmt::format("malformed solution JSON: {}", e.what()));
  }
}

}  // namespace mtvrp
