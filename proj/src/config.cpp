#include "marcus/config.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "marcus/errors.hpp"

namespace marcus {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// Drops a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

bool parse_number(const std::string& token, double& out) {
  if (token.empty()) return false;
  if (token.size() > 2 && token[0] == '0' && (token[1] == 'x' || token[1] == 'X')) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(token, &used, 16);
      if (used != token.size()) return false;
      out = static_cast<double>(v);
      return true;
    } catch (const std::exception&) {
      return false;
    }
  }
  char* end = nullptr;
  errno = 0;
  out = std::strtod(token.c_str(), &end);
  return end == token.c_str() + token.size() && errno == 0;
}

ConfigValue parse_value(const std::string& raw, int line, const std::string& key) {
  const std::string v = trim(raw);
  ConfigValue out;
  out.line = line;
  out.text = v;
  if (v.empty()) throw ConfigError("missing value", line, key);
  if (v.front() == '"' || v.front() == '\'') {
    if (v.size() < 2 || v.back() != v.front()) throw ConfigError("unterminated string", line, key);
    out.kind = ConfigValue::Kind::string;
    out.text = v.substr(1, v.size() - 2);
    return out;
  }
  if (v == "true" || v == "false") {
    out.kind = ConfigValue::Kind::boolean;
    out.boolean = v == "true";
    return out;
  }
  if (v.front() == '[') {
    if (v.back() != ']') throw ConfigError("arrays must be on one line", line, key);
    out.kind = ConfigValue::Kind::list;
    std::stringstream items(v.substr(1, v.size() - 2));
    std::string item;
    while (std::getline(items, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      double x = 0.0;
      if (!parse_number(item, x)) throw ConfigError("array entry '" + item + "' is not a number", line, key);
      out.list.push_back(x);
    }
    return out;
  }
  out.kind = ConfigValue::Kind::number;
  if (!parse_number(v, out.number)) throw ConfigError("cannot parse value '" + v + "'", line, key);
  return out;
}

const char* kind_name(ConfigValue::Kind k) {
  switch (k) {
    case ConfigValue::Kind::number: return "number";
    case ConfigValue::Kind::boolean: return "boolean";
    case ConfigValue::Kind::string: return "string";
    case ConfigValue::Kind::list: return "array";
  }
  return "value";
}

std::string dotted(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("malformed section header", lineno);
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty()) throw ConfigError("empty section name", lineno);
      cfg.sections_[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", lineno);
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) throw ConfigError("empty key", lineno);
    auto& entries = cfg.sections_[section];
    if (entries.count(key)) throw ConfigError("duplicate key", lineno, dotted(section, key));
    entries[key] = parse_value(s.substr(eq + 1), lineno, dotted(section, key));
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void Config::validate(const Schema& schema) const {
  for (const auto& [section, entries] : sections_) {
    const auto it = schema.find(section);
    if (it == schema.end()) {
      const int line = entries.empty() ? 0 : entries.begin()->second.line;
      throw ConfigError("unknown section [" + section + "]", line);
    }
    for (const auto& [key, value] : entries)
      if (!it->second.count(key)) throw ConfigError("unknown key", value.line, dotted(section, key));
  }
}

bool Config::has(const std::string& section, const std::string& key) const {
  const auto it = sections_.find(section);
  return it != sections_.end() && it->second.count(key);
}

const ConfigValue& Config::get(const std::string& section, const std::string& key) const {
  if (!has(section, key)) throw ConfigError("missing required key", 0, dotted(section, key));
  return sections_.at(section).at(key);
}

namespace {
const ConfigValue& expect(const Config& c, const std::string& section, const std::string& key,
                          ConfigValue::Kind kind) {
  const auto& v = c.get(section, key);
  if (v.kind != kind)
    throw ConfigError(std::string("expected a ") + kind_name(kind) + ", got a " + kind_name(v.kind),
                      v.line, dotted(section, key));
  return v;
}
}  // namespace

double Config::number(const std::string& section, const std::string& key, double fallback) const {
  if (!has(section, key)) return fallback;
  const auto& v = expect(*this, section, key, ConfigValue::Kind::number);
  if (!std::isfinite(v.number)) throw ConfigError("value must be finite", v.line, dotted(section, key));
  return v.number;
}

long Config::integer(const std::string& section, const std::string& key, long fallback) const {
  if (!has(section, key)) return fallback;
  const auto& v = expect(*this, section, key, ConfigValue::Kind::number);
  if (v.number != std::floor(v.number) || std::abs(v.number) > 9.0e15)
    throw ConfigError("expected an integer", v.line, dotted(section, key));
  return static_cast<long>(v.number);
}

std::uint64_t Config::unsigned64(const std::string& section, const std::string& key,
                                 std::uint64_t fallback) const {
  if (!has(section, key)) return fallback;
  const auto& v = get(section, key);
  try {
    return parse_seed(v.text);
  } catch (const InputError& e) {
    throw ConfigError(e.what(), v.line, dotted(section, key));
  }
}

bool Config::boolean(const std::string& section, const std::string& key, bool fallback) const {
  if (!has(section, key)) return fallback;
  return expect(*this, section, key, ConfigValue::Kind::boolean).boolean;
}

std::string Config::string(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
  if (!has(section, key)) return fallback;
  return expect(*this, section, key, ConfigValue::Kind::string).text;
}

std::vector<double> Config::list(const std::string& section, const std::string& key,
                                 const std::vector<double>& fallback) const {
  if (!has(section, key)) return fallback;
  return expect(*this, section, key, ConfigValue::Kind::list).list;
}

void Config::set(const std::string& section, const std::string& key, ConfigValue value) {
  sections_[section][key] = std::move(value);
}

std::uint64_t parse_seed(const std::string& text) {
  const std::string s = trim(text);
  if (s.empty() || s.front() == '-') throw InputError("seed must be a nonnegative integer: '" + text + "'");
  try {
    std::size_t used = 0;
    const bool hex = s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X');
    const auto v = std::stoull(s, &used, hex ? 16 : 10);
    if (used != s.size()) throw InputError("seed has trailing characters: '" + text + "'");
    return v;
  } catch (const std::invalid_argument&) {
    throw InputError("seed is not an integer: '" + text + "'");
  } catch (const std::out_of_range&) {
    throw InputError("seed does not fit in 64 bits: '" + text + "'");
  }
}

}  // namespace marcus
