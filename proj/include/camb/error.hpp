#pragma once

#include <stdexcept>
#include <string>

namespace camb {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

// Invalid argument, shape mismatch, or out-of-range configuration value.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// A value outside the [0,1] operator domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace camb
