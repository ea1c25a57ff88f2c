#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mmdyn {

enum class ErrorCode {
  MissingFile,
  SchemaViolation,
  UnsupportedDtype,
  ShortRead,
  NonFiniteValue,
  InfeasibleSpec,
  ValidationFailed,
  ZeroVector,
  SpanTooSmall,
  MixedKinds,
  LengthMismatch,
  TooShort,
  ShapeMismatch,
  BadK,
  EmptyCaption,
  MissingCaption,
  EmptySeries,
  InvalidArgument,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

  /// Message without the "<Code>: " prefix that what() carries.
  const std::string& detail() const noexcept { return detail_; }

  /// Returns a copy whose detail is prefixed with `context: `.
  Error annotate(std::string_view context) const;

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace mmdyn
