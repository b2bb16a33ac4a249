#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace slitbundle {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression text. `offset` is the byte offset of the offending token.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Evaluation outside the domain of an expression (division by zero, sqrt of a
/// negative number) or of a field.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration or request (bad JSON, inconsistent dimensions).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Singular frame, Gram matrix or metric.
class RankDeficiency : public Error {
 public:
  using Error::Error;
};

/// Integration left the domain before reaching the requested time.
class DomainExit : public Error {
 public:
  DomainExit(const std::string& what, double exit_time)
      : Error(what + " (exit time " + std::to_string(exit_time) + ")"),
        exit_time_(exit_time) {}
  double exit_time() const noexcept { return exit_time_; }

 private:
  double exit_time_;
};

/// Adaptive step size fell below the representable minimum, or the step budget ran out.
class StepUnderflow : public Error {
 public:
  StepUnderflow(const std::string& what, double time)
      : Error(what + " (t = " + std::to_string(time) + ")"), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// A state left the slit bundle: the fiber vector came too close to zero.
class SlitViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace slitbundle
