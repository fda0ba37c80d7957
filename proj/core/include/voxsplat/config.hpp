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

#include <map>
#include <string>
#include <vector>

namespace voxsplat {

/// Line-oriented `dotted.key = value [value...]` config. '#' starts a
/// comment. Keys are hierarchical by convention only (`camera.count`,
/// `object.0.center`).
class KeyValueConfig {
 public:
  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int64_t get_int(const std::string& key) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

  void set(const std::string& key, const std::string& value);
  /// Keys with the given prefix, in insertion-independent sorted order.
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  /// Serializes back to the text form (sorted keys).
  std::string to_string() const;

 private:
  std::map<std::string, std::vector<std::string>> values_;
};

}  // namespace voxsplat
