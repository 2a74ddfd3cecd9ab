#pragma once

#include <stdexcept>
#include <string>

namespace fiadd {

// Bad input: malformed files, out-of-range settings, violated preconditions.
// Surfaces as a validation failure at the API boundary.
class InvalidInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File system failures.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class Diverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fiadd
