// Copyright 2026 The DENet Authors. All Rights Reserved.
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

#include "denet/checkpoint.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace denet {

namespace {

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ConfigError("checkpoint truncated");
  return v;
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  if (n > (1U << 28)) throw ConfigError("checkpoint string too long");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw ConfigError("checkpoint truncated");
  return s;
}

}  // namespace

void save_checkpoint(const DenetModel& model, const std::string& rng_state, const std::string& path) {
  // Write to a temp file first so an interrupted save keeps the previous one.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
    out.write(kCheckpointMagic, 8);
    put<std::uint32_t>(out, kCheckpointVersion);
    put_string(out, model.config().serialize());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(model.num_classes()));
    put_string(out, rng_state);
    const auto tensors = model.store().named_tensors();
    put<std::uint64_t>(out, tensors.size());
    for (const auto& [name, t] : tensors) {
      put_string(out, name);
      put<std::uint32_t>(out, static_cast<std::uint32_t>(t->rank()));
      for (int d : t->shape()) put<std::int32_t>(out, d);
      out.write(reinterpret_cast<const char*>(t->data()), static_cast<std::streamsize>(t->size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("failed writing checkpoint '" + path + "'");
  }
  std::rename(tmp.c_str(), path.c_str());
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) throw ConfigError("'" + path + "' is not a checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw ConfigError("unsupported checkpoint version " + std::to_string(version));
  auto config = RunConfig::parse(get_string(in));
  const auto classes = get<std::uint32_t>(in);
  LoadedCheckpoint loaded;
  loaded.rng_state = get_string(in);
  loaded.model = std::make_unique<DenetModel>(config, static_cast<int>(classes));

  std::map<std::string, Tensor*> targets;
  for (auto& [name, t] : loaded.model->store().named_tensors()) targets[name] = t;
  const auto count = get<std::uint64_t>(in);
  if (count != targets.size()) throw ConfigError("checkpoint tensor count does not match the model");
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name = get_string(in);
    const auto rank = get<std::uint32_t>(in);
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(get<std::int32_t>(in));
    auto it = targets.find(name);
    if (it == targets.end()) throw ConfigError("checkpoint has unknown tensor '" + name + "'");
    if (it->second->shape() != shape) throw ConfigError("checkpoint tensor '" + name + "' has the wrong shape");
    in.read(reinterpret_cast<char*>(it->second->data()), static_cast<std::streamsize>(it->second->size() * sizeof(double)));
    if (!in) throw ConfigError("checkpoint truncated");
  }
  loaded.sha256 = file_sha256(path);
  return loaded;
}

std::string file_sha256(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  char buffer[1 << 16];
  while (in) {
    in.read(buffer, sizeof(buffer));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buffer, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return os.str();
}

}  // namespace denet
