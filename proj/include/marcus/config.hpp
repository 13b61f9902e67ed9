#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace marcus {

/// One `key = value` entry of a TOML-style configuration file.
struct ConfigValue {
  enum class Kind { number, boolean, string, list };
  Kind kind = Kind::number;
  double number = 0.0;
  bool boolean = false;
  std::string text;  // string contents, or the raw token for numbers
  std::vector<double> list;
  int line = 0;
};

/// Sections of key/value pairs. Supported syntax: `[section]` headers,
/// `key = value` with numbers (including 0x hex integers), true/false,
/// quoted strings, one-line numeric arrays, and `#` comments. Keys before
/// any header belong to the section "".
class Config {
 public:
  using Schema = std::map<std::string, std::set<std::string>>;

  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  /// Throws ConfigError for any section or key not in `schema`.
  void validate(const Schema& schema) const;

  bool has(const std::string& section, const std::string& key) const;
  const ConfigValue& get(const std::string& section, const std::string& key) const;

  double number(const std::string& section, const std::string& key, double fallback) const;
  long integer(const std::string& section, const std::string& key, long fallback) const;
  std::uint64_t unsigned64(const std::string& section, const std::string& key,
                           std::uint64_t fallback) const;
  bool boolean(const std::string& section, const std::string& key, bool fallback) const;
  std::string string(const std::string& section, const std::string& key,
                     const std::string& fallback) const;
  std::vector<double> list(const std::string& section, const std::string& key,
                           const std::vector<double>& fallback) const;

  /// Overrides (or adds) an entry, e.g. from a command-line flag.
  void set(const std::string& section, const std::string& key, ConfigValue value);

  const std::map<std::string, std::map<std::string, ConfigValue>>& sections() const {
    return sections_;
  }

 private:
  std::map<std::string, std::map<std::string, ConfigValue>> sections_;
};

/// Decimal or 0x-prefixed hexadecimal unsigned 64-bit integer.
std::uint64_t parse_seed(const std::string& text);

}  // namespace marcus
