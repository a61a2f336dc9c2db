#pragma once

#include <stdexcept>
#include <string>

namespace rydsurf {

// Exception taxonomy. The CLI maps the three families onto exit codes
// 2 (ParseError), 3 (ModelError) and 4 (FitError).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input files, configs or command lines.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Physically invalid or unsupported requests.
class ModelError : public Error {
 public:
  using Error::Error;
};

class InvalidStateError : public ModelError {
 public:
  using ModelError::ModelError;
};

class LookupError : public ModelError {
 public:
  using ModelError::ModelError;
};

class SelectionRuleError : public ModelError {
 public:
  using ModelError::ModelError;
};

class UnsupportedStateError : public ModelError {
 public:
  using ModelError::ModelError;
};

class DegeneracyError : public ModelError {
 public:
  using ModelError::ModelError;
};

/// Shift and polarizability of opposite sign: the |mj| hypothesis is wrong.
class SignMismatchError : public ModelError {
 public:
  using ModelError::ModelError;
};

class QuadratureError : public ModelError {
 public:
  QuadratureError(const std::string& what, double achieved)
      : ModelError(what + " (achieved relative error " + std::to_string(achieved) + ")"),
        achieved_(achieved) {}
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

/// Fits that cannot produce a result (no line, non-convergence).
class FitError : public Error {
 public:
  using Error::Error;
};

class NoLineError : public FitError {
 public:
  using FitError::FitError;
};

}  // namespace rydsurf
