#pragma once

// SPDX-License-Identifier: Apache-2.0

#include <stdexcept>
#include <string>
#include <string_view>

namespace restyle {

enum class ErrorCode {
  BraceInSource,
  EmptyField,
  MixedInstructions,
  UnknownAdapter,
  InvalidConfig,
  BackendUnavailable,
  AuthError,
  BudgetExceeded,
  EmptyInput,
  NoReferences,
  EmptyCorpus,
  EmptyText,
  EmptySource,
  ClassifierUnavailable,
  UnknownStyle,
  ParseError,
  DuplicateId,
  DatasetMismatch,
  NotFound,
  Conflict,
  IoError,
};

inline constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BraceInSource: return "BraceInSource";
    case ErrorCode::EmptyField: return "EmptyField";
    case ErrorCode::MixedInstructions: return "MixedInstructions";
    case ErrorCode::UnknownAdapter: return "UnknownAdapter";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::AuthError: return "AuthError";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NoReferences: return "NoReferences";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::EmptySource: return "EmptySource";
    case ErrorCode::ClassifierUnavailable: return "ClassifierUnavailable";
    case ErrorCode::UnknownStyle: return "UnknownStyle";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::DatasetMismatch: return "DatasetMismatch";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::Conflict: return "Conflict";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Dataset parse failure; `line` is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace restyle
