#ifndef SVYFOSR_ERRORS_HPP
#define SVYFOSR_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace svyfosr {

// Bad input files or malformed configuration (CLI exit code 2).
struct SchemaError : std::runtime_error {
  explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};

// Data violates a documented invariant (CLI exit code 2).
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Survey-design structure unusable for the requested scheme (CLI exit code 2).
struct DesignError : std::runtime_error {
  explicit DesignError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure: singular designs, too many failed replicates (CLI exit code 3).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace svyfosr

#endif
