#include "fdx/core/error.hpp"

namespace fdx {

std::string_view error_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::SizeTooSmall: return "SizeTooSmall";
    case ErrorCode::InvalidUtterance: return "InvalidUtterance";
    case ErrorCode::InvalidScript: return "InvalidScript";
    case ErrorCode::OverlongMonologue: return "OverlongMonologue";
    case ErrorCode::StartTooEarly: return "StartTooEarly";
    case ErrorCode::MissingTimestamps: return "MissingTimestamps";
    case ErrorCode::CollidingWords: return "CollidingWords";
    case ErrorCode::OverlapWrite: return "OverlapWrite";
    case ErrorCode::OutOfHorizon: return "OutOfHorizon";
    case ErrorCode::NoSpeechAtFrame: return "NoSpeechAtFrame";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::FrameOutOfRange: return "FrameOutOfRange";
    case ErrorCode::TooLong: return "TooLong";
    case ErrorCode::InvalidTemperature: return "InvalidTemperature";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::ConfigHashMismatch: return "ConfigHashMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::SessionExhausted: return "SessionExhausted";
    case ErrorCode::MalformedMessage: return "MalformedMessage";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code), detail_(message) {}

} // namespace fdx
