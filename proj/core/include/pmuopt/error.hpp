#pragma once

#include <stdexcept>
#include <string>

namespace pmuopt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document. `locus` is "line:col" for syntax errors or a
/// JSON pointer for schema errors.
class ParseError : public Error {
 public:
  ParseError(std::string locus, const std::string& what)
      : Error(locus + ": " + what), locus_(std::move(locus)) {}
  const std::string& locus() const noexcept { return locus_; }

 private:
  std::string locus_;
};

/// A well-formed document or argument that violates a model invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Network assembly or solve failure (singular blocks, bad fault spec).
class SimulationError : public Error {
 public:
  using Error::Error;
};

/// Scorer or classifier failure.
class ScoringError : public Error {
 public:
  using Error::Error;
};

}  // namespace pmuopt
