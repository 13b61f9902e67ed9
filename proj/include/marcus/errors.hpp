#pragma once

#include <stdexcept>
#include <string>

namespace marcus {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violated precondition on user-supplied input.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or domain-box exit during integration.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Query outside the range covered by a table or transform.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Forward map lost strict monotonicity (d = 1).
class DiffeomorphismError : public Error {
 public:
  using Error::Error;
};

class ToleranceError : public Error {
 public:
  using Error::Error;
};

class IterationError : public Error {
 public:
  using Error::Error;
};

class ConditioningError : public Error {
 public:
  using Error::Error;
};

/// Configuration problem, carrying the offending line and key when known.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& message, int line = 0, std::string key = {})
      : Error(format(message, line, key)), line_(line), key_(std::move(key)) {}

  int line() const noexcept { return line_; }
  const std::string& key() const noexcept { return key_; }

 private:
  static std::string format(const std::string& message, int line, const std::string& key) {
    std::string out = "config";
    if (line > 0) out += " line " + std::to_string(line);
    if (!key.empty()) out += " key '" + key + "'";
    return out + ": " + message;
  }

  int line_;
  std::string key_;
};

}  // namespace marcus
