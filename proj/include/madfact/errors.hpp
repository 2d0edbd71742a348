#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace madfact {

enum class ErrorCode {
  InvalidArgument,
  InvalidConfig,
  // providers
  BackendUnavailable,
  ScriptExhausted,
  SearchUnavailable,
  EmptyQuery,
  CacheIO,
  // clerk / jury
  MalformedClerkOutput,
  MalformedEvaluatorOutput,
  SearchDisabled,
  // judge / metrics
  EmptyJury,
  PyramidMismatch,
  EmptyDataset,
  InvalidWeightRule,
  MatcherUnavailable,
  LengthMismatch,
  EmptyGoldenSet,
  // eval-harness
  FileNotFound,
  ParseError,
  InsufficientTrue,
  EmptyInput,
  IO,
};

std::string_view to_string(ErrorCode code);

/// Broad error classes; the CLI maps each to one exit code.
enum class ErrorClass { Config, IO, Provider, Usage };

ErrorClass classify(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by validate_config; carries every violated field, not just the first.
class InvalidConfigError : public Error {
 public:
  struct Violation {
    std::string field;
    std::string message;
  };

  explicit InvalidConfigError(std::vector<Violation> violations);

  const std::vector<Violation>& violations() const noexcept { return violations_; }
  bool has_field(std::string_view field) const;

 private:
  std::vector<Violation> violations_;
};

/// ParseError that remembers the 1-based line it came from.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message);

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace madfact
