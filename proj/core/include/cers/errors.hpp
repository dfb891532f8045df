// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace cers {

/// Bad user-supplied configuration: unknown keys, out-of-range parameters.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent input data: files, shapes, labels.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure, e.g. a non-finite training loss.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Failure codes for the CEB1 bag container.
enum class BagFormatError {
  bad_magic,
  bad_version,
  truncated,
  zero_instances,
  zero_dim,
  non_finite,
};

class BagIoError : public DataError {
 public:
  BagIoError(BagFormatError code, const std::string& what)
      : DataError(what), code_(code) {}
  BagFormatError code() const { return code_; }

 private:
  BagFormatError code_;
};

}  // namespace cers
