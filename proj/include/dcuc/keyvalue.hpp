// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>

namespace dcuc {

// Flat "key = value" text, one pair per line, '#' starts a comment.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text, const std::string& origin);
  static KeyValues load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, std::uint64_t value);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& str(const std::string& key) const;
  double number(const std::string& key) const;
  std::uint64_t integer(const std::string& key) const;
  double number_or(const std::string& key, double fallback) const;
  std::uint64_t integer_or(const std::string& key, std::uint64_t fallback) const;

  // Throws ConfigMismatch naming the first key not in `allowed`.
  void require_known(const std::set<std::string>& allowed) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  std::string serialize() const;  // sorted by key
  void save(const std::filesystem::path& path) const;

 private:
  std::string origin_;
  std::map<std::string, std::string> values_;
};

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

}  // namespace dcuc
