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

#include "mtvrp/checkpoint.hpp"

#include <fmt/format.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include "mtvrp/errors.hpp"

namespace mtvrp {

namespace {

constexpr char kMagic[8] = {'M', 'T', 'V', 'R', 'P', 'C', 'K', '1'};
constexpr std::uint8_t kDtypeF64 = 8;

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string take(std::size_t len, const char* what) {
    need(len, what);
    std::string s = bytes_.substr(pos_, len);
    pos_ += len;
    return s;
  }

  void read_doubles(double* dst, std::size_t count, const char* what) {
    need(count * sizeof(double), what);
    std::memcpy(dst, bytes_.data() + pos_, count * sizeof(double));
    pos_ += count * sizeof(double);
  }

  [[nodiscard]] std::size_t pos() const noexcept { return pos_; }
  [[nodiscard]] bool at_end() const noexcept { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t len, const char* what) const {
    if (bytes_.size() - pos_ < len)
      throw IoError(fmt::format("checkpoint truncated at byte {} while reading {}", pos_, what));
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Json config_to_json(const ModelConfig& c) {
  Json j;
  j["embed_dim"] = c.embed_dim;
  j["n_layers"] = c.n_layers;
  j["n_heads"] = c.n_heads;
  j["ff_hidden"] = c.ff_hidden;
  j["clip"] = c.clip;
  j["norm"] = std::string(to_string(c.norm));
  j["feature_dim"] = c.feature_dim;
  return j;
}

ModelConfig config_from_json(const Json& j) {
  ModelConfig c;
  try {
    c.embed_dim = j.at("embed_dim").get<int>();
    c.n_layers = j.at("n_layers").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.ff_hidden = j.at("ff_hidden").get<int>();
    c.clip = j.at("clip").get<double>();
    c.norm = norm_mode_from_string(j.at("norm").get<std::string>());
    c.feature_dim = j.at("feature_dim").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(fmt::format("bad model config: {}", e.what()));
  }
  return c;
}

std::string serialize_checkpoint(const Checkpoint& ck) {
  Json header;
  header["config"] = config_to_json(ck.params.config);
  header["metadata"] = ck.metadata;
  const std::string text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out += text;

  std::uint32_t count = 0;
  ck.params.visit([&](const std::string&, const Matrix&) { ++count; });
  put<std::uint32_t>(out, count);
  ck.params.visit([&](const std::string& name, const Matrix& m) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint8_t>(out, kDtypeF64);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
    out.append(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double));
  });
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.take(sizeof(kMagic), "magic") != std::string(kMagic, sizeof(kMagic)))
    throw IoError("not a checkpoint file (bad magic at byte 0)");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    throw IoError(fmt::format("unsupported checkpoint version {} at byte 8", version));
  const auto json_len = r.get<std::uint64_t>("header length");
  const std::size_t json_at = r.pos();
  const std::string text = r.take(json_len, "header");
  Json header;
  try {
    header = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(fmt::format("corrupt checkpoint header at byte {}: {}", json_at, e.what()));
  }
  Checkpoint ck;
  const ModelConfig config = config_from_json(header.at("config"));
  try {
    config.validate();
  } catch (const UsageError& e) {
    throw IoError(fmt::format("checkpoint config invalid: {}", e.what()));
  }
  if (header.contains("metadata")) ck.metadata = header["metadata"];
  ck.params = init_params(config, 0);

  const std::size_t count_at = r.pos();
  const auto count = r.get<std::uint32_t>("tensor count");
  std::uint32_t expected = 0;
  ck.params.visit([&](const std::string&, const Matrix&) { ++expected; });
  if (count != expected)
    throw IoError(fmt::format("checkpoint has {} tensors at byte {}, config needs {}", count, count_at, expected));

  ck.params.visit([&](const std::string& name, Matrix& m) {
    const std::size_t at = r.pos();
    const auto len = r.get<std::uint32_t>("tensor name length");
    const std::string got = r.take(len, "tensor name");
    if (got != name) throw IoError(fmt::format("tensor '{}' at byte {}, expected '{}'", got, at, name));
    const auto dtype = r.get<std::uint8_t>("dtype");
    if (dtype != kDtypeF64) throw IoError(fmt::format("tensor '{}': unsupported dtype {}", name, dtype));
    const auto rows = r.get<std::uint32_t>("rows");
    const auto cols = r.get<std::uint32_t>("cols");
    if (rows != m.rows() || cols != m.cols())
      throw IoError(fmt::format("tensor '{}' at byte {} is {}x{}, expected {}x{}", name, at, rows, cols,
                                m.rows(), m.cols()));
    r.read_doubles(m.data(), static_cast<std::size_t>(m.size()), name.c_str());
  });
  if (!r.at_end()) throw IoError(fmt::format("trailing bytes after byte {}", r.pos()));
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ck);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("write failed for {}", path.string()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace mtvrp
