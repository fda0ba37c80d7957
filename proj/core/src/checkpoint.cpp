/*
 * Copyright (C) 2026 The voxsplat authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "voxsplat/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace voxsplat {

namespace {

constexpr char kMagic[4] = {'V', 'P', 'A', 'D'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& out, T v) {
  // Little-endian host assumed (x86/aarch64); bytes written in value order.
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.write(kMagic, 4);
  write_le<uint32_t>(out, kVersion);

  std::map<std::string, Checkpoint::Entry> table = ckpt.tensors;
  table["__step"] = {{1}, {static_cast<double>(ckpt.step)}};

  write_le<uint32_t>(out, static_cast<uint32_t>(table.size()));
  for (const auto& [name, entry] : table) {
    write_le<uint16_t>(out, static_cast<uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_le<uint8_t>(out, 1);  // f64
    write_le<uint8_t>(out, static_cast<uint8_t>(entry.shape.size()));
    int64_t numel = 1;
    for (int64_t d : entry.shape) {
      write_le<uint32_t>(out, static_cast<uint32_t>(d));
      numel *= d;
    }
    if (numel != static_cast<int64_t>(entry.data.size())) {
      throw std::invalid_argument("save_checkpoint: payload size mismatch for " + name);
    }
    out.write(reinterpret_cast<const char*>(entry.data.data()),
              static_cast<std::streamsize>(entry.data.size() * sizeof(double)));
  }
  write_le<uint32_t>(out, static_cast<uint32_t>(ckpt.config_echo.size()));
  out.write(ckpt.config_echo.data(), static_cast<std::streamsize>(ckpt.config_echo.size()));
  if (!out) throw std::runtime_error("save_checkpoint: write failed on " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  }
  const uint32_t version = read_le<uint32_t>(in);
  if (version != kVersion) {
    throw std::runtime_error("load_checkpoint: unsupported format version in " + path);
  }
  Checkpoint ckpt;
  const uint32_t count = read_le<uint32_t>(in);
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t nlen = read_le<uint16_t>(in);
    std::string name(nlen, '\0');
    in.read(name.data(), nlen);
    const uint8_t dtype = read_le<uint8_t>(in);
    const uint8_t rank = read_le<uint8_t>(in);
    Checkpoint::Entry entry;
    int64_t numel = 1;
    for (uint8_t d = 0; d < rank; ++d) {
      const uint32_t dim = read_le<uint32_t>(in);
      entry.shape.push_back(dim);
      numel *= dim;
    }
    entry.data.resize(static_cast<size_t>(numel));
    if (dtype == 1) {
      in.read(reinterpret_cast<char*>(entry.data.data()),
              static_cast<std::streamsize>(entry.data.size() * sizeof(double)));
    } else if (dtype == 0) {
      std::vector<float> tmp(static_cast<size_t>(numel));
      in.read(reinterpret_cast<char*>(tmp.data()),
              static_cast<std::streamsize>(tmp.size() * sizeof(float)));
      for (size_t k = 0; k < tmp.size(); ++k) entry.data[k] = tmp[k];
    } else {
      throw std::runtime_error("load_checkpoint: unknown dtype code in " + path);
    }
    if (!in) throw std::runtime_error("load_checkpoint: truncated tensor in " + path);
    ckpt.tensors[name] = std::move(entry);
  }
  const uint32_t clen = read_le<uint32_t>(in);
  ckpt.config_echo.resize(clen);
  in.read(ckpt.config_echo.data(), clen);
  if (!in) throw std::runtime_error("load_checkpoint: truncated config echo in " + path);
  auto it = ckpt.tensors.find("__step");
  if (it != ckpt.tensors.end()) {
    ckpt.step = static_cast<uint64_t>(it->second.data.at(0));
    ckpt.tensors.erase(it);
  }
  return ckpt;
}

}  // namespace voxsplat
