#pragma once

#include <stdexcept>
#include <string>

namespace jccp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An iterative numerical kernel did not converge within its cap.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Malformed problem text.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a problem invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A user callback produced NaN or Inf.
class EvaluationError : public Error {
 public:
  EvaluationError(const std::string& what, long index)
      : Error(what), index_(index) {}
  long index() const noexcept { return index_; }

 private:
  long index_;
};

}  // namespace jccp
