#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fdx {

// Every failure the library reports carries one of these codes. The CLI
// prints the code name and the service maps it onto wire error codes.
enum class ErrorCode {
    InvalidArgument,
    SizeTooSmall,
    InvalidUtterance,
    InvalidScript,
    OverlongMonologue,
    StartTooEarly,
    MissingTimestamps,
    CollidingWords,
    OverlapWrite,
    OutOfHorizon,
    NoSpeechAtFrame,
    DimMismatch,
    FrameOutOfRange,
    TooLong,
    InvalidTemperature,
    CorruptCheckpoint,
    ConfigHashMismatch,
    LengthMismatch,
    DivergenceDetected,
    ConfigMismatch,
    SessionExhausted,
    MalformedMessage,
    IoError,
};

std::string_view error_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }
    // The message without the code-name prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

} // namespace fdx
