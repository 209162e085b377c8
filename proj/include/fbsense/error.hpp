#pragma once

#include <stdexcept>
#include <string>

namespace fbsense {

// Base for everything the library throws on bad input or a failed run.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parameters or configuration outside their documented domain.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Two arrays or records sampled on different grids.
class GridMismatchError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A kernel with weight on future samples.
class NonCausalError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Closed-loop state left the configured bound.
class InstabilityError : public Error {
 public:
  using Error::Error;
};

// Triangular system with a vanishing pivot.
class SingularSystemError : public Error {
 public:
  using Error::Error;
};

// File-system or format failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fbsense
