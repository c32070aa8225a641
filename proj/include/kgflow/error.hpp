#pragma once

#include <stdexcept>
#include <string>

namespace kgflow {

// Domain/validation failure. Maps to CLI exit code 1.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Filesystem or stream failure. Maps to CLI exit code 2.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace kgflow
