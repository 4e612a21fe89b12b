#pragma once

#include <stdexcept>
#include <string>

namespace semilab {

// Malformed or out-of-range arguments (negative times, non-finite vectors, ...).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Caller broke a structural precondition, e.g. mismatched dimensions.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A numerical routine could not produce a trustworthy result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A simulated path left the admissible region |X| <= 1e6 (1 + |x|).
class BlowUpError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& message, int line = 0)
      : std::runtime_error(format(field, message, line)), field_(field), line_(line) {}

  const std::string& field() const { return field_; }
  int line() const { return line_; }

 private:
  static std::string format(const std::string& field, const std::string& message, int line) {
    std::string out = "config error";
    if (line > 0) out += " (line " + std::to_string(line) + ")";
    if (!field.empty()) out += " in '" + field + "'";
    return out + ": " + message;
  }

  std::string field_;
  int line_ = 0;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace semilab
