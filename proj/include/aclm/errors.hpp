#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace aclm {

/// Bad caller-supplied value (out-of-range rate, dimension mismatch, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input text that cannot be read at all; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : std::runtime_error(message + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed input that violates a domain invariant (bad IOB2, negative score, ...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A required resource is missing for a specific item (attention map, embedding, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Partner retrieval cannot proceed (singleton index, unknown id).
class RetrievalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A remote backend failed; message carries the response body when there is one.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An evaluation could not produce any result (e.g. every scorer call failed).
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace aclm
