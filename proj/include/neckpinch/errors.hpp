#pragma once

#include <stdexcept>
#include <string>

namespace neckpinch {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A ProfileGrid (or derived data) violates its invariants.
class InvalidGrid : public Error {
public:
  using Error::Error;
};

/// NaN/Inf showed up, or an iterative solve failed to converge.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// Time step rejected repeatedly until it fell below the minimum.
class StepRejected : public Error {
public:
  using Error::Error;
};

/// Not enough history / samples to evaluate the requested quantity.
class InsufficientData : public Error {
public:
  using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
public:
  using Error::Error;
};

/// File or directory problems in the harness.
class IoError : public Error {
public:
  using Error::Error;
};

} // namespace neckpinch
