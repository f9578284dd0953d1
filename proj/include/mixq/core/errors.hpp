#pragma once

#include <stdexcept>
#include <string>

namespace mixq {

// Base for every library error. The CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments or an unusable request (exit code 2).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed, inconsistent or corrupt input data (exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or divergence (exit code 4).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace mixq
