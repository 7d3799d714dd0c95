#pragma once

#include <stdexcept>
#include <string>

namespace aomcal {

// Error classes map one-to-one onto the CLI exit codes.
enum class ErrorClass { config = 2, data = 3, numeric = 4 };

class Error : public std::runtime_error {
public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
  ErrorClass error_class() const noexcept { return cls_; }
  int exit_code() const noexcept { return static_cast<int>(cls_); }

private:
  ErrorClass cls_;
};

class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& what) : Error(ErrorClass::config, what) {}
};

class DataError : public Error {
public:
  explicit DataError(const std::string& what) : Error(ErrorClass::data, what) {}
};

/// Shape mismatch between arguments. Reported as a data error.
class DimensionError : public DataError {
public:
  explicit DimensionError(const std::string& what) : DataError(what) {}
};

class NumericError : public Error {
public:
  explicit NumericError(const std::string& what) : Error(ErrorClass::numeric, what) {}
};

}  // namespace aomcal
