#pragma once

#include <stdexcept>
#include <string>

namespace aggdiff {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument to a numeric routine (non-finite input, empty mass, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed scenario / layout / kernel configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A solver could not make progress (step rejection, Newton failure, collision).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Mass reached the outermost cells of the computational domain.
class BoundaryContact : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Bumps of one species overlap, so no multi-bump state can be assembled.
class DisjointnessViolated : public Error {
 public:
  using Error::Error;
};

}  // namespace aggdiff
