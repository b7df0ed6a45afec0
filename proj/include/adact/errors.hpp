#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace adact {

/// Base of every error raised by the library. Each subclass corresponds to one
/// failure category so callers (and tests) can catch precisely.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error { public: using Error::Error; };
class ArgumentError : public Error { public: using Error::Error; };
class ContractError : public Error { public: using Error::Error; };
class NumericError : public Error { public: using Error::Error; };
class ScheduleError : public Error { public: using Error::Error; };
class SpecError : public Error { public: using Error::Error; };
class FormatError : public Error { public: using Error::Error; };
class TrainingError : public Error { public: using Error::Error; };
class ComparisonError : public Error { public: using Error::Error; };

/// Carries every problem found while validating a configuration, each
/// prefixed with the key path it concerns.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> issues) : Error(join(issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string out = "invalid configuration";
    for (const auto& i : issues) out += "\n  " + i;
    return out;
  }

  std::vector<std::string> issues_;
};

}  // namespace adact
