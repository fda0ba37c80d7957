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

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace voxsplat {

/// Named tensor table with a config echo.
///
/// Binary layout (all integers little-endian):
///   magic "VPAD", version u32, tensor count u32, then per tensor:
///   name length u16 + UTF-8 name, dtype u8 (0 = f32, 1 = f64), rank u8,
///   dims as u32s, raw payload; finally the config echo as u32 length +
///   UTF-8 text.
struct Checkpoint {
  struct Entry {
    std::vector<int64_t> shape;
    std::vector<double> data;  // stored as f64 (dtype 1)
  };

  std::map<std::string, Entry> tensors;
  std::string config_echo;
  uint64_t step = 0;  // mirrored into the "__step" tensor on save

  bool has(const std::string& name) const { return tensors.count(name) != 0; }
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace voxsplat
