#pragma once

#include <stdexcept>
#include <string>

namespace flowfield {

// Malformed or internally inconsistent input: bad files, mismatched frame
// shapes, labels out of range. Maps to exit code 2 in the CLI.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// A linear-algebra step degenerated: a covariance that should be positive
// definite failed to factor even after the documented fallbacks. Maps to
// exit code 3 in the CLI.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace flowfield
