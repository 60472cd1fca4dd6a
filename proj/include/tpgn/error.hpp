#pragma once

#include <stdexcept>
#include <string>

namespace tpgn {

enum class ErrorKind {
  Io,
  Parse,
  EmptyCorpus,
  NoComments,
  EmptyInput,
  UnknownWord,
  ShapeMismatch,
  EmptySequence,
  NonScalarLoss,
  EmptyArticle,
  EmptyTarget,
  NonFiniteLoss,
  CorpusTooSmall,
  InvalidArgument,
  Format,
};

const char* error_kind_name(ErrorKind kind);

/// Single exception type for the library; `kind()` tells callers (notably the
/// CLI exit-code mapping) what went wrong.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Malformed dataset line. Line numbers are 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : Error(ErrorKind::Parse, "line " + std::to_string(line) + ": " + reason),
        line_(line),
        reason_(reason) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

}  // namespace tpgn
