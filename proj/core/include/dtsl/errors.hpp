#pragma once

#include <stdexcept>
#include <string>

namespace dtsl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes or dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A numeric or categorical value violates a precondition.
class ValueError : public Error {
 public:
  using Error::Error;
};

// File or stream level failure (missing, unreadable, corrupt, wrong version).
class IoError : public Error {
 public:
  using Error::Error;
};

// A run configuration field is out of range or inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A graph node has no backward rule but gradients were requested through it.
class UnsupportedOperationError : public Error {
 public:
  using Error::Error;
};

}  // namespace dtsl
