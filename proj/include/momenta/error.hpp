#pragma once

#include <stdexcept>
#include <string>

namespace momenta {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: wrong sizes, out-of-range parameters, bad files.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// A polynomial degree exceeds what a basis or relaxation order supports.
class DegreeError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Point extraction from a moment matrix failed (solution at infinity).
class ExtractionError : public Error {
 public:
  using Error::Error;
};

}  // namespace momenta
