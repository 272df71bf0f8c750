#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace evtes {

/// Raised for malformed files, missing keys and unknown keys.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One `[section]` of an INI document. Keys keep file order.
///
/// Accessors record which keys were read so that `reject_unknown()` can
/// report anything the caller never consumed.
class IniSection {
 public:
  explicit IniSection(std::string name = {}) : name_(std::move(name)) {}

  const std::string& name() const { return name_; }
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  void set(const std::string& key, const std::string& value);
  bool has(std::string_view key) const;

  std::optional<std::string> raw(std::string_view key) const;
  std::string get_string(std::string_view key) const;
  std::string get_string(std::string_view key, const std::string& fallback) const;
  double get_double(std::string_view key) const;
  double get_double(std::string_view key, double fallback) const;
  long long get_int(std::string_view key) const;
  long long get_int(std::string_view key, long long fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;
  std::vector<double> get_double_list(std::string_view key) const;

  /// Throws ConfigError naming the first key that no accessor touched.
  void reject_unknown() const;

 private:
  std::string name_;
  std::vector<std::pair<std::string, std::string>> entries_;
  mutable std::set<std::string, std::less<>> used_;
};

class IniDocument {
 public:
  static IniDocument parse(std::string_view text, const std::string& origin = "<string>");
  static IniDocument load(const std::string& path);

  std::vector<IniSection>& sections() { return sections_; }
  const std::vector<IniSection>& sections() const { return sections_; }

  const IniSection* find(std::string_view name) const;
  IniSection* find(std::string_view name);
  IniSection& ensure(const std::string& name);

  std::string to_string() const;

 private:
  std::vector<IniSection> sections_;
};

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

double parse_double(std::string_view text, std::string_view what);

}  // namespace evtes
