#pragma once

#include <stdexcept>
#include <string>

namespace sfkit {

/// Raised for malformed inputs: shape mismatches, out-of-range coordinates,
/// unreadable files. Maps to CLI exit code 1.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when an internal postcondition fails (non-finite values, broken
/// bijection, conservation violation). Maps to CLI exit code 2.
class InvariantError : public std::runtime_error {
 public:
  explicit InvariantError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sfkit
