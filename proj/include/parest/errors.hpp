#pragma once

#include <stdexcept>
#include <string>

namespace parest {

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SingularOperator : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A norm or operation was asked of a function whose temporal profile cannot support it.
struct ProfileMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Patch source violates the zero-mean condition required on interior patches.
struct CompatibilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Internal inconsistency in a local system (should never fire on valid input).
struct AssemblyError : std::logic_error {
  using std::logic_error::logic_error;
};

struct RefinementError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnsupportedData : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  ConfigError(const std::string& msg, int line = 0, std::string field = {})
      : std::runtime_error(format(msg, line, field)), line(line), field(std::move(field)) {}
  int line;
  std::string field;

 private:
  static std::string format(const std::string& msg, int line, const std::string& field) {
    std::string out;
    if (line > 0) out += "line " + std::to_string(line) + ": ";
    if (!field.empty()) out += "'" + field + "': ";
    return out + msg;
  }
};

}  // namespace parest
