#pragma once

#include <stdexcept>
#include <string>

namespace transfuse {

// Bad input: out-of-range parameters, malformed files, schema violations.
// The CLI maps this to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SchemaError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ReferentialError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Bundle integrity failures (version, checksum, truncation).
class BundleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace transfuse
