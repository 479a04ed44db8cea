#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace autograde {

// Base for every error raised by the library. Callers that only need a
// message catch this; the subclasses exist so tests and the CLI can map
// failures onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (CSV, JSON Lines). `line` is 1-based, 0 if unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Embedding file whose rows disagree on shape.
class FormatError : public ParseError {
 public:
  using ParseError::ParseError;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

// A mutation operator found no applicable site.
class NotMutable : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class RankDeficientError : public Error {
 public:
  using Error::Error;
};

// Metric evaluated outside its domain (zero MAPE target, constant R² target).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int epoch)
      : Error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace autograde
