#pragma once

#include <stdexcept>
#include <string>

namespace shortlong {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied argument violates an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Too little data to carry out the requested fit or split.
class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// A target sample falls where the behavior data has no support.
class CoverageError : public Error {
 public:
  using Error::Error;
};

/// The least-squares design matrix does not have full column rank.
class RankDeficientError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver hit its iteration cap.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double final_gradient_norm)
      : Error(what), final_gradient_norm_(final_gradient_norm) {}

  double final_gradient_norm() const noexcept { return final_gradient_norm_; }

 private:
  double final_gradient_norm_;
};

/// The estimator cannot run on the given kind of data.
class UnsupportedDomain : public Error {
 public:
  using Error::Error;
};

/// Malformed input file or configuration text.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace shortlong
