#include "mmdyn/error.hpp"

#include <string>

namespace mmdyn {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::ShortRead: return "ShortRead";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::InfeasibleSpec: return "InfeasibleSpec";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::SpanTooSmall: return "SpanTooSmall";
    case ErrorCode::MixedKinds: return "MixedKinds";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::BadK: return "BadK";
    case ErrorCode::EmptyCaption: return "EmptyCaption";
    case ErrorCode::MissingCaption: return "MissingCaption";
    case ErrorCode::EmptySeries: return "EmptySeries";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      detail_(message) {}

Error Error::annotate(std::string_view context) const {
  return Error(code_, std::string(context) + ": " + detail_);
}

}  // namespace mmdyn
