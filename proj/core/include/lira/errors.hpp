#ifndef LIRA_ERRORS_HPP_
#define LIRA_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace lira {

// Bad configuration or invalid arguments supplied by the caller.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent corpus / fixture files.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf escaped a numeric computation; training must abort.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace lira

#endif  // LIRA_ERRORS_HPP_
