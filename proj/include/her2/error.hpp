#pragma once

#include <stdexcept>
#include <string>

namespace her2 {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad parameters, singular stain matrix, unknown or empty rule table.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Caller input that violates a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// No tumor cells to score; the operator has to add FOVs.
class IndeterminateScore : public Error {
 public:
  using Error::Error;
};

class CoordinateError : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

}  // namespace her2
