#pragma once

#include <stdexcept>
#include <string>

namespace pacfl {

// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kOk = 0,
  kConfig = 1,
  kNumeric = 2,
  kIo = 3,
  kBoundFailed = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ExitCode::kConfig, what) {}
};

// A documented precondition of an operation was violated by the caller.
class PreconditionError : public ConfigError {
 public:
  explicit PreconditionError(const std::string& what) : ConfigError(what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ExitCode::kNumeric, what) {}
};

// Constant estimation produced no usable sample.
class EstimationError : public NumericError {
 public:
  explicit EstimationError(const std::string& what) : NumericError(what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ExitCode::kIo, what) {}
};

// Throws PreconditionError with `message` unless `condition` holds.
void require(bool condition, const std::string& message);

}  // namespace pacfl
