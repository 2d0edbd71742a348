#include "madfact/errors.hpp"

#include <algorithm>

namespace madfact {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::ScriptExhausted: return "ScriptExhausted";
    case ErrorCode::SearchUnavailable: return "SearchUnavailable";
    case ErrorCode::EmptyQuery: return "EmptyQuery";
    case ErrorCode::CacheIO: return "CacheIO";
    case ErrorCode::MalformedClerkOutput: return "MalformedClerkOutput";
    case ErrorCode::MalformedEvaluatorOutput: return "MalformedEvaluatorOutput";
    case ErrorCode::SearchDisabled: return "SearchDisabled";
    case ErrorCode::EmptyJury: return "EmptyJury";
    case ErrorCode::PyramidMismatch: return "PyramidMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::InvalidWeightRule: return "InvalidWeightRule";
    case ErrorCode::MatcherUnavailable: return "MatcherUnavailable";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyGoldenSet: return "EmptyGoldenSet";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InsufficientTrue: return "InsufficientTrue";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::IO: return "IO";
  }
  return "Unknown";
}

ErrorClass classify(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidWeightRule:
      return ErrorClass::Config;
    case ErrorCode::CacheIO:
    case ErrorCode::FileNotFound:
    case ErrorCode::ParseError:
    case ErrorCode::IO:
      return ErrorClass::IO;
    case ErrorCode::BackendUnavailable:
    case ErrorCode::ScriptExhausted:
    case ErrorCode::SearchUnavailable:
    case ErrorCode::MalformedClerkOutput:
    case ErrorCode::MalformedEvaluatorOutput:
    case ErrorCode::MatcherUnavailable:
      return ErrorClass::Provider;
    default:
      return ErrorClass::Usage;
  }
}

namespace {

std::string join_violations(const std::vector<InvalidConfigError::Violation>& vs) {
  std::string out = "invalid config:";
  for (const auto& v : vs) {
    out += " [";
    out += v.field;
    out += "] ";
    out += v.message;
    out += ';';
  }
  return out;
}

}  // namespace

InvalidConfigError::InvalidConfigError(std::vector<Violation> violations)
    : Error(ErrorCode::InvalidConfig, join_violations(violations)),
      violations_(std::move(violations)) {}

bool InvalidConfigError::has_field(std::string_view field) const {
  return std::any_of(violations_.begin(), violations_.end(),
                     [&](const Violation& v) { return v.field == field; });
}

ParseError::ParseError(std::size_t line, const std::string& message)
    : Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + message),
      line_(line) {}

}  // namespace madfact
