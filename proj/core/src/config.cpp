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

#include "voxsplat/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace voxsplat {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config: missing '=' on line " + std::to_string(lineno));
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string rest = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error("config: empty key on line " + std::to_string(lineno));
    }
    std::istringstream vs(rest);
    std::vector<std::string> vals;
    std::string tok;
    while (vs >> tok) vals.push_back(tok);
    cfg.values_[key] = std::move(vals);
  }
  return cfg;
}

std::string KeyValueConfig::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end() || it->second.empty()) {
    throw std::runtime_error("config: missing key '" + key + "'");
  }
  return it->second[0];
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return (it == values_.end() || it->second.empty()) ? fallback : it->second[0];
}

double KeyValueConfig::get_double(const std::string& key) const {
  try {
    return std::stod(get_string(key));
  } catch (const std::invalid_argument&) {
    throw std::runtime_error("config: key '" + key + "' is not a number");
  }
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

int64_t KeyValueConfig::get_int(const std::string& key) const {
  try {
    return std::stoll(get_string(key));
  } catch (const std::invalid_argument&) {
    throw std::runtime_error("config: key '" + key + "' is not an integer");
  }
}

int64_t KeyValueConfig::get_int(const std::string& key, int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get_string(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::runtime_error("config: key '" + key + "' is not a boolean");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::runtime_error("config: missing key '" + key + "'");
  std::vector<double> out;
  for (const std::string& s : it->second) {
    try {
      out.push_back(std::stod(s));
    } catch (const std::invalid_argument&) {
      throw std::runtime_error("config: key '" + key + "' has a non-numeric entry");
    }
  }
  return out;
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key,
                                                const std::vector<double>& fallback) const {
  return has(key) ? get_doubles(key) : fallback;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  std::istringstream vs(value);
  std::vector<std::string> vals;
  std::string tok;
  while (vs >> tok) vals.push_back(tok);
  values_[key] = std::move(vals);
}

std::vector<std::string> KeyValueConfig::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) {
    if (k.rfind(prefix, 0) == 0) out.push_back(k);
  }
  return out;
}

std::string KeyValueConfig::to_string() const {
  std::ostringstream out;
  for (const auto& [k, v] : values_) {
    out << k << " =";
    for (const std::string& s : v) out << " " << s;
    out << "\n";
  }
  return out.str();
}

}  // namespace voxsplat
