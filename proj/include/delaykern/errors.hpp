#pragma once

#include <stdexcept>
#include <string>

namespace delaykern {

// Every failure raised by the library derives from Error. The two families
// below let callers (the CLI in particular) tell bad input apart from a
// numerical failure such as instability.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Input outside an operation's domain.
class InputError : public Error {
public:
  using Error::Error;
};

// A computation that was well posed but failed numerically.
class NumericalFailure : public Error {
public:
  using Error::Error;
};

class DomainError : public InputError {
public:
  using InputError::InputError;
};

// k = |a| with a = 0: the closed-form variance is undefined.
class BoundaryError : public InputError {
public:
  using InputError::InputError;
};

// Spectral sampling too coarse for the requested spatial grid.
class AliasError : public InputError {
public:
  using InputError::InputError;
};

// Spatial grid too coarse to resolve the delay filter.
class ResolutionError : public InputError {
public:
  using InputError::InputError;
};

class SymmetryError : public InputError {
public:
  using InputError::InputError;
};

// a*T >= 1: no proportional gain stabilizes the delayed loop.
class NoSolutionError : public NumericalFailure {
public:
  using NumericalFailure::NumericalFailure;
};

class DivergenceError : public NumericalFailure {
public:
  using NumericalFailure::NumericalFailure;
};

class InstabilityError : public NumericalFailure {
public:
  using NumericalFailure::NumericalFailure;
};

class UnstabilizableError : public NumericalFailure {
public:
  UnstabilizableError(const std::string& what, std::size_t mode)
      : NumericalFailure(what), mode_(mode) {}

  std::size_t mode() const noexcept { return mode_; }

private:
  std::size_t mode_;
};

}  // namespace delaykern
