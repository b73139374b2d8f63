#pragma once

#include <stdexcept>
#include <string>

namespace midframe {

// File access / decode / encode problems. CLI maps these to exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Contract violations on data: dimension mismatches, malformed inputs,
// unsupported layouts. CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numeric failure: divergence, non-finite values where finiteness is
// required. CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace midframe
