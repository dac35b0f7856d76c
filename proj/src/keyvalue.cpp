// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcuc/keyvalue.hpp"

#include <charconv>
#include <limits>
#include <sstream>

#include "dcuc/checksum.hpp"
#include "dcuc/error.hpp"

namespace dcuc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

KeyValues KeyValues::parse(const std::string& text, const std::string& origin) {
  KeyValues kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigMismatch(origin + ":" + std::to_string(lineno) +
                           ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw ConfigMismatch(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    kv.values_[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  return parse(read_file(path), path.string());
}

void KeyValues::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}
void KeyValues::set(const std::string& key, double value) {
  values_[key] = format_double(value);
}
void KeyValues::set(const std::string& key, std::uint64_t value) {
  values_[key] = std::to_string(value);
}

const std::string& KeyValues::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw ConfigMismatch(origin_ + ": missing key '" + key + "'");
  }
  return it->second;
}

double KeyValues::number(const std::string& key) const {
  const std::string& s = str(key);
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    throw ConfigMismatch(origin_ + ": key '" + key + "' is not a number: " + s);
  }
  return v;
}

std::uint64_t KeyValues::integer(const std::string& key) const {
  const std::string& s = str(key);
  std::uint64_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw ConfigMismatch(origin_ + ": key '" + key +
                         "' is not a non-negative integer: " + s);
  }
  return v;
}

double KeyValues::number_or(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

std::uint64_t KeyValues::integer_or(const std::string& key,
                                    std::uint64_t fallback) const {
  return has(key) ? integer(key) : fallback;
}

void KeyValues::require_known(const std::set<std::string>& allowed) const {
  for (const auto& [k, v] : values_) {
    if (!allowed.count(k)) {
      throw ConfigMismatch(origin_ + ": unknown key '" + k + "'");
    }
  }
}

std::string KeyValues::serialize() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

void KeyValues::save(const std::filesystem::path& path) const {
  write_file(path, serialize());
}

}  // namespace dcuc
