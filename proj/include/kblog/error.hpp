#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kblog {

enum class ErrorCode {
  OverlappingReplacement,
  InvalidSpan,
  NoGrammarMatches,
  SourceMismatch,
  MalformedDoi,
  UnknownDoi,
  UnsupportedAgency,
  NetworkError,
  NotFound,
  MalformedMetadata,
  KeyMismatch,
  CorruptCache,
  EmptyBody,
  UnknownField,
  BadAccession,
  IoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::OverlappingReplacement: return "OverlappingReplacement";
    case ErrorCode::InvalidSpan: return "InvalidSpan";
    case ErrorCode::NoGrammarMatches: return "NoGrammarMatches";
    case ErrorCode::SourceMismatch: return "SourceMismatch";
    case ErrorCode::MalformedDoi: return "MalformedDoi";
    case ErrorCode::UnknownDoi: return "UnknownDoi";
    case ErrorCode::UnsupportedAgency: return "UnsupportedAgency";
    case ErrorCode::NetworkError: return "NetworkError";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::MalformedMetadata: return "MalformedMetadata";
    case ErrorCode::KeyMismatch: return "KeyMismatch";
    case ErrorCode::CorruptCache: return "CorruptCache";
    case ErrorCode::EmptyBody: return "EmptyBody";
    case ErrorCode::UnknownField: return "UnknownField";
    case ErrorCode::BadAccession: return "BadAccession";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Exception carried through every layer of the engine. The code is stable and
/// tests match on it; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace kblog
